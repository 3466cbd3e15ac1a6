import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossywalk.model import LatticeParams, build_real_space_hamiltonian
from lossywalk.spectrum import (
    EdgeCriteria,
    balancing_scales,
    edge_profiles,
    eigensystem,
    open_boundary_spectrum,
    spectrum_scan,
)


def residuals(params, result):
    H = build_real_space_hamiltonian(params)
    U, E = result.right_eigenvectors, result.eigenvalues
    return np.linalg.norm(H @ U - U * E, axis=0) / np.linalg.norm(H, 2)


def chiral_mismatch(result):
    """Largest distance from each shifted eigenvalue to the nearest negated one."""
    z = result.eigenvalues - result.chiral_center
    return np.max(np.min(np.abs(z[:, None] + z[None, :]), axis=1))


def test_dimer_eigenvalues():
    res = eigensystem(build_real_space_hamiltonian(LatticeParams(L=1, v=0.5)))
    expected = np.array([-np.sqrt(0.25 - 1 / 16), np.sqrt(0.25 - 1 / 16)]) - 0.25j
    np.testing.assert_allclose(res.eigenvalues, expected, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(res.right_eigenvectors, axis=0), 1)


def test_eigensystem_sorted_and_biorthogonal():
    H = build_real_space_hamiltonian(LatticeParams(L=6, v=0.2))
    res = eigensystem(H, left=True)
    E = res.eigenvalues
    assert np.all(np.diff(E.real) >= -1e-12)
    G = res.left_eigenvectors.conj().T @ res.right_eigenvectors
    np.testing.assert_allclose(np.diag(G), 1, atol=1e-10)
    np.testing.assert_allclose(H @ res.right_eigenvectors, res.right_eigenvectors * E, atol=1e-10)


def test_eigensystem_rejects_non_square():
    with pytest.raises(ValueError):
        eigensystem(np.zeros((2, 3)))


def test_lossless_spectrum_real():
    res = open_boundary_spectrum(LatticeParams(L=10, v=0.3, gamma=0.0))
    assert np.max(np.abs(res.eigenvalues.imag)) < 1e-10


def test_lower_half_plane():
    res = open_boundary_spectrum(LatticeParams(v=0.3))
    assert np.max(res.eigenvalues.imag) <= 1e-10


@pytest.mark.parametrize(
    "v, count, sides",
    [
        (0.3, 2, {"left"}),
        (-0.3, 2, {"right"}),
        (0.9, 0, set()),
        (-0.9, 0, set()),
        (0.5, 2, {"left"}),
        (-0.5, 2, {"right"}),
    ],
)
def test_edge_census(v, count, sides):
    res = open_boundary_spectrum(LatticeParams(v=v))
    assert res.edge_count == count
    assert set(res.sides()) == sides


def test_v_zero_one_per_edge():
    res = open_boundary_spectrum(LatticeParams(v=0.0))
    assert sorted(res.sides()) == ["left", "right"]


def test_edge_states_sit_below_bulk():
    res = open_boundary_spectrum(LatticeParams(v=0.3))
    dist = np.abs(res.eigenvalues - res.chiral_center)
    edge = dist[res.edge_flags]
    bulk = dist[~res.edge_flags]
    assert np.max(edge) * 3 < np.min(bulk)


def test_edge_profiles_near_coincide():
    profiles, diff = edge_profiles(open_boundary_spectrum(LatticeParams(v=0.3)))
    assert profiles.shape == (51, 2)
    np.testing.assert_allclose(profiles.sum(axis=0), 1, atol=1e-12)
    assert np.all(np.argmax(profiles, axis=0) == 0)
    assert diff < 1e-6
    assert edge_profiles(open_boundary_spectrum(LatticeParams(v=0.9))) [0].shape == (51, 0)


@pytest.mark.parametrize("v", [-0.9, -0.5, -0.3, -0.2, 0.0, 0.2, 0.26, -0.26, 0.3, 0.55, 0.57])
def test_residuals_and_chiral_pairs(v):
    p = LatticeParams(v=v)
    res = open_boundary_spectrum(p)
    assert np.max(residuals(p, res)) <= 1e-8
    assert chiral_mismatch(res) < 1e-8


def test_balancing_scales_symmetric():
    d = balancing_scales(LatticeParams(v=0.3))
    assert d.shape == (102,)
    assert np.all(d > 0)
    # v = +/- gamma/4 uses the clamped ratio instead of failing
    assert np.all(np.isfinite(balancing_scales(LatticeParams(v=0.25))))


def test_unbalanced_route_available():
    res = open_boundary_spectrum(LatticeParams(L=8, v=0.1), balanced=False)
    assert res.eigenvalues.size == 16


def test_scan_count_zero_or_two():
    vs = np.round(np.arange(-100, 101) * 0.01, 10)
    results = spectrum_scan(LatticeParams(), vs)
    for v, res in zip(vs, results):
        assert np.max(res.eigenvalues.imag) <= 1e-10
        if abs(abs(v) - 0.559) > 0.01:
            assert res.edge_count == (2 if abs(v) < 0.559 else 0), v


def test_scan_boundary_by_bisection():
    lo, hi = 0.3, 0.9
    template = LatticeParams()
    count = lambda v: open_boundary_spectrum(template.with_v(v)).edge_count  # noqa: E731
    assert count(lo) == 2 and count(hi) == 0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if count(mid) == 2:
            lo = mid
        else:
            hi = mid
    assert abs(0.5 * (lo + hi) - 0.559) < 0.01


def test_scan_workers_invariant():
    vs = [-0.4, 0.0, 0.4]
    a = spectrum_scan(LatticeParams(), vs, workers=1)
    b = spectrum_scan(LatticeParams(), vs, workers=2)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.eigenvalues, y.eigenvalues)
        np.testing.assert_array_equal(x.edge_flags, y.edge_flags)


def test_scan_empty():
    with pytest.raises(ValueError):
        spectrum_scan(LatticeParams(), [])


def test_lossless_edge_region():
    p = LatticeParams(gamma=0.0)
    for v in (-0.4, -0.2, 0.0, 0.2, 0.4):
        assert open_boundary_spectrum(p.with_v(v)).edge_count == 2, v
    for v in (-0.9, -0.6, 0.6, 0.9):
        assert open_boundary_spectrum(p.with_v(v)).edge_count == 0, v


def test_lossless_edge_region_wider_window():
    """Near |v| = r the edge modes spread out; a wider edge window still finds them."""
    p = LatticeParams(gamma=0.0)
    crit = EdgeCriteria(edge_cells=10)
    assert open_boundary_spectrum(p.with_v(0.45), crit).edge_count == 2


@pytest.mark.parametrize("kwargs", [dict(edge_cells=0), dict(weight_threshold=1.2), dict(gap_factor=1.0)])
def test_edge_criteria_validation(kwargs):
    with pytest.raises(ValueError):
        EdgeCriteria(**kwargs)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 30), st.floats(-1, 1), st.floats(0.2, 1), st.floats(0, 2))
def test_spectrum_properties(L, v, r, gamma):
    p = LatticeParams(L=L, v=v, r=r, gamma=gamma)
    res = open_boundary_spectrum(p)
    assert np.max(res.eigenvalues.imag) <= 1e-10
    assert np.max(residuals(p, res)) <= 1e-8
    assert chiral_mismatch(res) < 1e-8
    # mirror: v -> -v leaves the spectrum unchanged
    other = open_boundary_spectrum(dataclasses.replace(p, v=-v))
    gap = np.abs(res.eigenvalues[:, None] - other.eigenvalues[None, :])
    assert np.max(np.min(gap, axis=1)) < 1e-8 and np.max(np.min(gap, axis=0)) < 1e-8
