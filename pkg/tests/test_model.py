import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GEOMETRY, make_recording
from gazekit.model import (
    DisplayGeometry, EyePolicy, Fixation, GazeSample, Recording, Scanpath, UnitUnavailableError,
    pixels_to_degrees, sample_duration, visual_angle_to_pixels,
)


def test_geometry_pitch():
    assert GEOMETRY.mm_per_px_x == pytest.approx(530 / 1920)
    assert GEOMETRY.mm_per_px_y == pytest.approx(298.125 / 1080)
    assert not GEOMETRY.is_anisotropic


@pytest.mark.parametrize("field", ["width_mm", "height_mm", "width_px", "height_px", "viewing_distance_mm"])
def test_geometry_rejects_non_positive(field):
    kw = dict(width_mm=530.0, height_mm=298.0, width_px=1920, height_px=1080, viewing_distance_mm=600.0)
    kw[field] = 0
    with pytest.raises(ValueError):
        DisplayGeometry(**kw)


def test_anisotropic_geometry_warns():
    with pytest.warns(UserWarning):
        g = DisplayGeometry(530.0, 400.0, 1920, 1080, 600.0)
    assert g.is_anisotropic


def test_pixels_to_degrees_known_value():
    # 1 cm at 60 cm: atan(10 / 600)
    px = 10.0 / GEOMETRY.mm_per_px_x
    assert pixels_to_degrees(px, 0.0, GEOMETRY) == pytest.approx(math.degrees(math.atan(10 / 600)), rel=1e-12)
    assert pixels_to_degrees(0.0, px, GEOMETRY) == pytest.approx(math.degrees(math.atan(10 / 600)), rel=1e-12)


def test_conversions_need_geometry():
    with pytest.raises(UnitUnavailableError):
        pixels_to_degrees(1.0, 1.0, None)
    with pytest.raises(UnitUnavailableError):
        visual_angle_to_pixels(1.0, None)


@pytest.mark.parametrize("theta", [0.0, -1.0, 90.0, 120.0])
def test_visual_angle_domain(theta):
    with pytest.raises(ValueError):
        visual_angle_to_pixels(theta, GEOMETRY)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 60.0))
def test_angle_pixel_round_trip(theta):
    px = visual_angle_to_pixels(theta, GEOMETRY)
    assert pixels_to_degrees(px, 0.0, GEOMETRY) == pytest.approx(theta, rel=1e-9)


def test_conversions_vectorise():
    out = visual_angle_to_pixels(np.array([1.0, 2.0]), GEOMETRY)
    assert out.shape == (2,)
    assert out[1] > out[0]


@pytest.mark.parametrize("policy,expected", [
    (EyePolicy.LEFT, [True, True, False, False]),
    (EyePolicy.RIGHT, [True, False, True, False]),
    (EyePolicy.AVERAGE, [True, True, True, False]),
    (EyePolicy.STRICT_BOTH, [True, False, False, False]),
])
def test_eye_policies(policy, expected):
    vl = [True, True, False, False]
    vr = [True, False, True, False]
    samples = [GazeSample(k * 1000, 1.0, 2.0, 3.0, 3.0, a, b) for k, (a, b) in enumerate(zip(vl, vr))]
    assert [s.is_valid(policy) for s in samples] == expected
    rec = Recording.from_samples(samples, 1000.0)
    assert rec.valid(policy).tolist() == expected


def test_missing_gaze_is_never_valid():
    s = GazeSample(0, None, 2.0, validity_left=True, validity_right=True)
    assert not s.is_valid(EyePolicy.AVERAGE)


def test_recording_requires_increasing_time():
    with pytest.raises(ValueError):
        make_recording([1, 2, 3], [1, 2, 3], t=[0, 1000, 1000])


def test_recording_rate_consistency():
    with pytest.raises(ValueError):
        make_recording([1.0] * 10, [1.0] * 10, rate=1000.0, t=np.arange(10) * 2000)


def test_recording_arrays_read_only():
    rec = make_recording([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        rec.x[0] = 5.0


def test_samples_round_trip():
    rec = make_recording([1.0, np.nan, 3.0], [4.0, 5.0, 6.0], rate=500.0)
    again = Recording.from_samples(rec.samples, 500.0, geometry=GEOMETRY)
    assert np.array_equal(again.t, rec.t)
    assert np.array_equal(again.x, rec.x, equal_nan=True)
    assert again.valid().tolist() == [True, False, True]


def test_pupil_policy_average_ignores_invalid_eye():
    rec = Recording(
        t=np.array([0, 1000]), x=np.ones(2), y=np.ones(2),
        pupil_left=np.array([3.0, 3.0]), pupil_right=np.array([5.0, 5.0]),
        valid_left=np.array([True, False]), valid_right=np.array([True, True]), sampling_rate_hz=1000.0,
    )
    assert rec.pupil(EyePolicy.AVERAGE).tolist() == [4.0, 5.0]
    assert np.isnan(rec.pupil(EyePolicy.STRICT_BOTH)[1])


def test_take_and_replace():
    rec = make_recording(np.arange(10.0), np.arange(10.0))
    sub = rec.take(slice(2, 5))
    assert sub.t.tolist() == [2000, 3000, 4000]
    moved = rec.replace(x=rec.x + 1)
    assert moved.x[0] == 1.0 and rec.x[0] == 0.0


def test_sample_duration_counts_one_period_per_sample():
    t = np.array([0, 4000, 8000, 12000])
    assert sample_duration(t, 0, 0, 4000.0) == 4000
    assert sample_duration(t, 1, 3, 4000.0) == 12000


def test_scanpath_requires_increasing_onsets():
    a = Fixation(0.0, 0.0, onset=1000, duration=100)
    b = Fixation(1.0, 1.0, onset=1000, duration=100)
    with pytest.raises(ValueError):
        Scanpath((a, b))


def test_scanpath_points_with_duration():
    sp = Scanpath((Fixation(1.0, 2.0, 0, 200_000), Fixation(3.0, 4.0, 300_000, 100_000)))
    assert sp.points().tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert sp.points(duration_scale=0.5).tolist() == [[1.0, 2.0, 100.0], [3.0, 4.0, 50.0]]
