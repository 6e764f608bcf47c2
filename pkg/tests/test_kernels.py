import numpy as np
import pytest

from streetdyn import _core_py, kernels

core = pytest.importorskip("streetdyn._core", reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND == "cython"
    assert kernels.bicycle_step is core.bicycle_step


def test_bicycle_parity():
    rng = np.random.default_rng(0)
    for _ in range(200):
        state = (*rng.normal(size=2) * 10, rng.uniform(0, 25), rng.uniform(-3, 3), rng.uniform(-0.6, 0.6))
        args = (rng.uniform(-0.05, 0.05), rng.uniform(-4, 4), 1.2, 1.5, 0.1, 5, 0.6)
        np.testing.assert_allclose(core.bicycle_step(*state, *args), _core_py.bicycle_step(*state, *args),
                                   rtol=0, atol=1e-12)


def test_rollout_parity():
    rng = np.random.default_rng(1)
    actions = np.column_stack([rng.uniform(-0.05, 0.05, 300), rng.uniform(-4, 4, 300)])
    state = (0.0, 0.0, 5.0, 0.0, 0.0)
    a = core.bicycle_rollout(state, actions, 0.9, 0.9, 0.1, 5, 0.6)
    b = _core_py.bicycle_rollout(state, actions, 0.9, 0.9, 0.1, 5, 0.6)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


def test_segment_distance_parity():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-20, 20, size=(500, 2))
    segs = rng.uniform(-20, 20, size=(40, 4))
    segs[0, 2:] = segs[0, :2]
    np.testing.assert_allclose(core.segment_min_distance(pts, segs), _core_py.segment_min_distance(pts, segs),
                               atol=1e-12)
    assert np.all(np.isinf(core.segment_min_distance(pts, np.zeros((0, 4)))))


def test_overlap_parity():
    rng = np.random.default_rng(3)
    n = 2000
    ca, cb = rng.uniform(-4, 4, (n, 2)), rng.uniform(-4, 4, (n, 2))
    ha, hb = rng.uniform(-3.2, 3.2, n), rng.uniform(-3.2, 3.2, n)
    a = core.obb_overlap_series(ca, ha, 4.5, 1.8, cb, hb, 8.0, 2.5)
    b = _core_py.obb_overlap_series(ca, ha, 4.5, 1.8, cb, hb, 8.0, 2.5)
    np.testing.assert_array_equal(np.asarray(a), b)
    assert 0 < b.sum() < n
    a = core.disc_obb_overlap_series(ca, 0.4, cb, hb, 4.5, 1.8)
    b = _core_py.disc_obb_overlap_series(ca, 0.4, cb, hb, 4.5, 1.8)
    np.testing.assert_array_equal(np.asarray(a), b)
    assert 0 < b.sum() < n
