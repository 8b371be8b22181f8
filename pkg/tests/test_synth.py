import configparser
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.events import IvtConfig, detect_idt, detect_ivt
from gazekit.ingest import format_normalized, read_normalized
from gazekit.synth import (
    BlinkSegment, Fixate, Pursuit, SaccadeTo, SplitMix64, TraceSpec, generate, parse_segments,
    trace_spec_from_config,
)

# published reference outputs of SplitMix64 seeded with 1234567
REFERENCE_1234567 = [
    6457827717110365317, 3203168211198807973, 9817491932198370423, 4593380528125082431, 16408922859458223821,
]


def test_splitmix_reference_sequence():
    rng = SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(5)] == REFERENCE_1234567


def test_uniform_from_top_53_bits():
    rng = SplitMix64(1234567)
    assert rng.uniform() == ((REFERENCE_1234567[0] >> 11) + 1) / 2 ** 53


def test_normal_is_box_muller_pair():
    rng = SplitMix64(1234567)
    u1 = ((REFERENCE_1234567[0] >> 11) + 1) / 2 ** 53
    u2 = ((REFERENCE_1234567[1] >> 11) + 1) / 2 ** 53
    r = math.sqrt(-2 * math.log(u1))
    assert rng.normal() == r * math.cos(2 * math.pi * u2)
    assert rng.normal() == r * math.sin(2 * math.pi * u2)


def test_normal_moments():
    rng = SplitMix64(7)
    z = np.array([rng.normal() for _ in range(20000)])
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03


def test_single_still_fixation():
    rec, truth = generate(TraceSpec([Fixate((300.0, 200.0), 1000)], 500.0))
    assert len(rec) == 500
    assert (rec.x == 300.0).all() and (rec.y == 200.0).all()
    assert [(e.kind, e.first, e.last, e.onset, e.duration) for e in truth] == [("fixation", 0, 499, 0, 1_000_000)]


def test_segments_and_truth():
    spec = TraceSpec([Fixate((100.0, 100.0), 100), SaccadeTo((200.0, 100.0), 10), BlinkSegment(20),
                      Pursuit((200.0, 100.0), (300.0, 100.0), 50)], 1000.0)
    rec, truth = generate(spec)
    assert [e.kind for e in truth] == ["fixation", "saccade", "blink", "pursuit"]
    assert [(e.first, e.last) for e in truth] == [(0, 99), (100, 109), (110, 129), (130, 179)]
    assert rec.x[109] == 200.0 and rec.x[100] == 110.0  # sweep lands on target
    assert not rec.valid()[110:130].any() and rec.valid()[130:].all()
    assert rec.x[130] == 200.0 and rec.x[179] == 300.0


def test_determinism_and_seed_sensitivity():
    spec = TraceSpec([Fixate((500.0, 500.0), 300), SaccadeTo((900.0, 500.0), 40), Fixate((900.0, 500.0), 300)],
                     250.0, 0.3, seed=42)
    a = format_normalized(generate(spec)[0])
    b = format_normalized(generate(spec)[0])
    assert a == b
    other = TraceSpec(spec.segments, 250.0, 0.3, seed=43)
    assert format_normalized(generate(other)[0]) != a


def test_noise_level():
    spec = TraceSpec([Fixate((960.0, 540.0), 20000)], 1000.0, 0.5, seed=3)
    rec, _ = generate(spec)
    sigma_px = 0.5 * 1920 / 530 * 600 * math.pi / 180  # small-angle approximation
    assert np.std(rec.x) == pytest.approx(sigma_px, rel=0.05)


def test_spec_validation():
    with pytest.raises(ValueError):
        TraceSpec([Fixate((0.0, 0.0), 0)])
    with pytest.raises(ValueError):
        TraceSpec([Fixate((0.0, 0.0), 100)], sampling_rate_hz=0)
    with pytest.raises(ValueError):
        TraceSpec([Fixate((0.0, 0.0), 100)], noise_sigma_deg=-1)
    with pytest.raises(ValueError):
        TraceSpec([Fixate((0.0, 0.0), 0.1)], sampling_rate_hz=100)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(150, 600), st.integers(100, 1800), st.integers(100, 1000),
                          st.integers(2, 8)), min_size=1, max_size=4),
       st.sampled_from([250.0, 500.0, 1000.0]))
def test_noise_free_ivt_recovers_boundaries(plan, rate):
    segs = [Fixate((960.0, 540.0), 200)]
    pos = (960.0, 540.0)
    for fix_ms, x, y, sac_samples in plan:
        target = (float(x), float(y))
        if math.dist(pos, target) < 60.0 * sac_samples:
            target = (pos[0] + 60.0 * sac_samples + 1.0, pos[1])
        segs.append(SaccadeTo(target, sac_samples * 1000.0 / rate))
        segs.append(Fixate(target, fix_ms))
        pos = target
    rec, truth = generate(TraceSpec(segs, rate))
    fix, _ = detect_ivt(rec, IvtConfig(30.0, 100.0))
    want = [e for e in truth if e.kind == "fixation"]
    assert len(fix) == len(want)
    period = rec.period_us
    for f, e in zip(fix, want):
        assert abs(f.onset - e.onset) <= period
        assert abs(f.onset + f.duration - e.onset - e.duration) <= period
    assert len(detect_idt(rec)) == len(want)


def test_pursuit_is_not_a_clean_fixation():
    segs = [Fixate((200.0, 500.0), 200), Pursuit((200.0, 500.0), (1700.0, 500.0), 1000), Fixate((1700.0, 500.0), 200)]
    rec, _ = generate(TraceSpec(segs, 500.0))
    fix, _ = detect_ivt(rec, IvtConfig(30.0, 100.0))
    assert all(f.onset < 200_000 or f.onset >= 1_200_000 for f in fix)


def test_parse_segments():
    segs = parse_segments("fixate 10 20 300\nsaccade 30 40 20; blink 100\npursuit 0 0 5 5 80\n")
    assert segs == (Fixate((10.0, 20.0), 300.0), SaccadeTo((30.0, 40.0), 20.0), BlinkSegment(100.0),
                    Pursuit((0.0, 0.0), (5.0, 5.0), 80.0))
    with pytest.raises(ValueError, match="hop"):
        parse_segments("hop 1 2")


def test_trace_spec_from_config_and_normalized_output():
    cp = configparser.ConfigParser()
    cp.read_string("[trace]\nsegments = fixate 100 100 200; saccade 400 100 20; fixate 400 100 200\n"
                   "sampling_rate_hz = 250\nnoise_sigma_deg = 0.1\nseed = 9\n")
    spec = trace_spec_from_config(cp)
    assert spec.sampling_rate_hz == 250.0 and spec.seed == 9 and len(spec.segments) == 3
    rec, _ = generate(spec)
    again = read_normalized(io.StringIO(format_normalized(rec)))
    assert np.array_equal(again.x, rec.x) and again.geometry == rec.geometry
