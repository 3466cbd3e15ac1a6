import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossywalk.errors import DegenerateGBZ, GapClosed
from lossywalk.model import LatticeParams
from lossywalk.topology import (
    bloch_winding,
    gbz_radius,
    loop_winding,
    nonbloch_transition,
    nonbloch_winding,
    offdiagonal_windings,
    q_factor,
    winding_point,
    winding_scan,
)

CRITICAL = math.sqrt(0.5**2 + 1 / 16)


@pytest.mark.parametrize("v, expected", [(0.0, 1.0), (0.3, math.sqrt(0.05 / 0.55)), (0.5, math.sqrt(0.25 / 0.75))])
def test_gbz_radius(v, expected):
    assert gbz_radius(LatticeParams(v=v)) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("v", [0.25, -0.25])
def test_gbz_degenerate(v):
    with pytest.raises(DegenerateGBZ):
        gbz_radius(LatticeParams(v=v))


def test_gbz_is_where_root_moduli_coincide():
    """Both roots of the characteristic quadratic in beta share one modulus on the GBZ."""
    p = LatticeParams(v=0.3)
    a, c = p.v + p.gamma / 4, p.v - p.gamma / 4
    for E in (0.1, 0.7 - 0.2j, -1.3 + 0.05j):
        b = (p.v**2 - p.gamma**2 / 16) + p.r**2 - E**2
        roots = np.roots([a * p.r, b, c * p.r])
        assert abs(np.prod(np.abs(roots)) - gbz_radius(p) ** 2) < 1e-12


def test_loop_winding():
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    assert loop_winding(np.exp(1j * th)) == pytest.approx(1)
    assert loop_winding(np.exp(-2j * th)) == pytest.approx(-2)
    assert loop_winding(3 + np.exp(1j * th)) == pytest.approx(0)


@pytest.mark.parametrize("v, expected", [(0.0, 1.0), (0.5, 0.5), (-0.5, 0.5), (0.9, 0.0), (0.1, 1.0)])
def test_bloch_winding(v, expected):
    assert bloch_winding(LatticeParams(v=v)) == expected


@pytest.mark.parametrize("v", [0.25, -0.25, 0.75, -0.75])
def test_bloch_gap_closes(v):
    with pytest.raises(GapClosed):
        bloch_winding(LatticeParams(v=v))


def test_sample_minimums():
    with pytest.raises(ValueError):
        bloch_winding(LatticeParams(), 128)
    with pytest.raises(ValueError):
        nonbloch_winding(LatticeParams(), 256)


@pytest.mark.parametrize("v, expected", [(0.3, 1), (-0.3, 1), (0.0, 1), (0.5, 1), (0.55, 1), (0.57, 0), (0.9, 0), (-0.9, 0)])
def test_nonbloch_winding(v, expected):
    assert nonbloch_winding(LatticeParams(v=v)) == expected


def test_nonbloch_gap_closes_at_transition():
    with pytest.raises(GapClosed):
        nonbloch_winding(LatticeParams(v=CRITICAL))


def test_transition_bisection():
    v_c = nonbloch_transition(LatticeParams(), 0.3, 0.9)
    assert abs(v_c - CRITICAL) < 1e-3
    with pytest.raises(ValueError):
        nonbloch_transition(LatticeParams(), 0.1, 0.2)


def test_q_factor_properties():
    p = LatticeParams(v=0.3)
    rho = gbz_radius(p)
    betas = rho * np.exp(1j * np.linspace(-np.pi, np.pi, 32, endpoint=False))
    q = q_factor(p, betas)
    assert np.all(np.abs(q) > 0)
    # Q squares to one, so its off-diagonal factors satisfy q * q_lower = 1; |q| cannot vanish
    with pytest.raises(ValueError):
        q_factor(p, [0.0])


@pytest.mark.parametrize("v", [-0.9, -0.5, -0.3, 0.0, 0.2, 0.4, 0.55, 0.6, 0.8])
def test_contour_consistency(v):
    """The Q-matrix winding equals the half-sum of the off-diagonal windings on the GBZ."""
    p = LatticeParams(v=v)
    w_plus, w_minus = offdiagonal_windings(p, gbz_radius(p))
    assert nonbloch_winding(p) == 0.5 * (w_plus + w_minus)


@pytest.mark.parametrize("v", [-0.7, -0.3, 0.0, 0.3, 0.5, 0.56, 0.9])
def test_stable_under_refinement(v):
    p = LatticeParams(v=v)
    assert abs(bloch_winding(p, 1024) - bloch_winding(p, 2048)) < 1e-6
    assert abs(nonbloch_winding(p, 1024) - nonbloch_winding(p, 2048)) < 1e-6


@pytest.mark.parametrize("v", [-0.8, -0.4, 0.0, 0.2, 0.45, 0.7])
def test_hermitian_limit(v):
    p = LatticeParams(v=v, gamma=0.0)
    expected = 1 if abs(v) < p.r else 0
    assert bloch_winding(p) == expected
    assert nonbloch_winding(p) == expected


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.2).filter(lambda x: min(abs(x - 0.25), abs(x - CRITICAL), abs(x - 0.75)) > 1e-3))
def test_mirror_symmetric_window(v):
    p = LatticeParams(v=v)
    assert nonbloch_winding(p) == nonbloch_winding(p.with_v(-v)) == (1 if v < CRITICAL else 0)
    assert bloch_winding(p) == bloch_winding(p.with_v(-v))


def test_scan_records_errors_and_continues():
    res = winding_scan(LatticeParams(), [0.2, 0.25, 0.3])
    assert [r.nonbloch_w for r in res] == [1, None, 1]
    assert res[1].errors and not res[0].errors
    assert res[1].bloch_w is None and res[2].bloch_w == 0.5


def test_winding_point_fields():
    r = winding_point(LatticeParams(v=0.5))
    assert (r.v, r.bloch_w, r.nonbloch_w) == (0.5, 0.5, 1)
    assert r.gbz_radius == pytest.approx(math.sqrt(1 / 3))
