import numpy as np
import pytest

from gazekit import kernels

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")


def test_backend_reported():
    assert kernels.BACKEND in BACKENDS


@needs_both
@pytest.mark.parametrize("maximize", [True, False])
def test_nw_fill_parity(maximize):
    rng = np.random.default_rng(1)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for _ in range(100):
        k = int(rng.integers(1, 6))
        S = rng.normal(0, 1, (k, k))
        a = rng.integers(0, k, int(rng.integers(0, 12))).astype(np.int64)
        b = rng.integers(0, k, int(rng.integers(0, 12))).astype(np.int64)
        d, i = float(rng.normal()), float(rng.normal())
        assert np.array_equal(py.nw_fill(a, b, S, d, i, maximize), cy.nw_fill(a, b, S, d, i, maximize))


@needs_both
def test_idt_windows_parity():
    rng = np.random.default_rng(2)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for _ in range(50):
        n = int(rng.integers(5, 400))
        steps = rng.normal(0, 3, (n, 2))
        jumps = rng.random(n) < 0.03
        steps[jumps] *= 30
        xy = np.cumsum(steps, axis=0)
        valid = rng.random(n) > 0.05
        t = np.arange(n, dtype=np.int64) * 4000
        args = (xy[:, 0].copy(), xy[:, 1].copy(), valid, t, 4000.0, float(rng.uniform(5, 60)), 100_000.0)
        assert list(py.idt_windows(*args)) == list(cy.idt_windows(*args))


@needs_both
@pytest.mark.parametrize("radius", [-1.0, 12.0])
def test_gaussian_accumulate_parity(radius):
    rng = np.random.default_rng(3)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    xs, ys = rng.uniform(-5, 45, 7), rng.uniform(-5, 35, 7)
    ws = rng.uniform(0.1, 1.0, 7)
    a = np.zeros((30, 40))
    b = np.zeros((30, 40))
    py.gaussian_accumulate(a, xs, ys, ws, 4.0, radius)
    cy.gaussian_accumulate(b, xs, ys, ws, 4.0, radius)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
