"""Bloch and non-Bloch winding numbers of the chiral two-band form.

After the constant ``-i gamma/4`` offset is removed and the cell rotation is
applied, the Bloch Hamiltonian is purely off-diagonal with entries

    q+(beta) = v + gamma/4 + r/beta,     q-(beta) = v - gamma/4 + r*beta.

On the unit circle ``beta = exp(ik)`` this gives the Bloch winding; on the
generalized Brillouin zone, the circle ``|beta| = gbz_radius``, it gives the
non-Bloch winding that predicts open-boundary edge states.

Orientation: all windings are reported so that the Hermitian SSH topological
phase (``gamma=0``, ``|v| < r``) has winding +1.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import BiorthogonalBreakdown, DegenerateGBZ, GapClosed, LossyWalkError
from .model import SIGMA_Z, LatticeParams, offdiagonal_factors

GAP_TOL = 1e-12
BIORTH_TOL = 1e-12
MAX_SAMPLES = 1 << 16


@dataclasses.dataclass(frozen=True)
class WindingResult:
    v: float
    bloch_w: float | None
    nonbloch_w: int | None
    gbz_radius: float | None
    n_samples: int
    errors: tuple[str, ...] = ()


def gbz_radius(params: LatticeParams) -> float:
    """Radius of the generalized Brillouin zone.

    The characteristic equation is quadratic in beta with root product
    ``(v - gamma/4)/(v + gamma/4)`` for every energy, so ``|beta1| = |beta2|``
    fixes the radius to the square root of its modulus. Without loss the ratio
    is 1 for every v, including the fully dimerized point v = 0 where it reads
    0/0, so the lossless GBZ is the unit circle.
    """
    if params.gamma == 0:
        return 1.0
    plus = params.v + params.gamma / 4
    minus = params.v - params.gamma / 4
    if plus == 0 or minus == 0:
        raise DegenerateGBZ(
            f"v = {params.v:g} equals +/-gamma/4; the GBZ collapses to radius 0 or infinity"
        )
    return math.sqrt(abs(minus / plus))


def _wrap(d: np.ndarray, period: float) -> np.ndarray:
    """Wrap phase differences into ``(-period/2, period/2]``."""
    return period / 2 - np.mod(period / 2 - d, period)


def _phase_increments(samples: np.ndarray, period: float = 2 * np.pi) -> np.ndarray:
    """Phase steps between consecutive samples of a closed loop."""
    closed = np.append(samples, samples[:1])
    return _wrap(np.angle(closed[1:] / closed[:-1]), period)


def loop_winding(samples: np.ndarray) -> float:
    """Winding of a sampled closed curve around the origin (counterclockwise +)."""
    return float(np.sum(_phase_increments(samples)) / (2 * np.pi))


def _contour_phase(func, n_samples: int, period: float = 2 * np.pi) -> tuple[float, int]:
    """Total phase change of ``func(theta)`` as theta runs once over [-pi, pi).

    Starts from ``n_samples`` uniform points and bisects only those intervals
    whose phase step is not below pi/4, so sharp features near a gap closure
    cost a handful of extra samples instead of a global refinement.
    Returns ``(total_phase, samples_used)``.
    """
    theta = -np.pi + 2 * np.pi * np.arange(n_samples + 1) / n_samples
    values = func(theta[:-1])
    values = np.append(values, values[:1])
    for _ in range(60):
        inc = _wrap(np.angle(values[1:] / values[:-1]), period)
        coarse = np.nonzero(np.abs(inc) >= np.pi / 4)[0]
        if coarse.size == 0 or theta.size > MAX_SAMPLES:
            break
        mid = 0.5 * (theta[coarse] + theta[coarse + 1])
        new_vals = func(mid)
        theta = np.insert(theta, coarse + 1, mid)
        values = np.insert(values, coarse + 1, new_vals)
    inc = _wrap(np.angle(values[1:] / values[:-1]), period)
    return float(np.sum(inc)), theta.size - 1


def _check_gap(params: LatticeParams, radius: float):
    upper = abs(abs(params.v + params.gamma / 4) - params.r / radius)
    lower = abs(abs(params.v - params.gamma / 4) - params.r * radius)
    if min(upper, lower) < GAP_TOL:
        raise GapClosed(
            f"off-diagonal factor vanishes on |beta| = {radius:g} at v = {params.v:g}"
        )


def offdiagonal_windings(params: LatticeParams, radius: float, n_samples: int = 1024):
    """Integer windings ``(w_plus, w_minus)`` of ``q+`` and ``q-`` on ``|beta|=radius``.

    ``w_plus`` is oriented clockwise (``q+`` depends on ``1/beta``) so that both
    equal +1 in the Hermitian SSH topological phase.
    """
    _check_gap(params, radius)
    phase_up, _ = _contour_phase(
        lambda th: offdiagonal_factors(params, radius * np.exp(1j * th))[0], n_samples
    )
    phase_lo, _ = _contour_phase(
        lambda th: offdiagonal_factors(params, radius * np.exp(1j * th))[1], n_samples
    )
    return int(round(-phase_up / (2 * np.pi))), int(round(phase_lo / (2 * np.pi)))


def bloch_winding(params: LatticeParams, n_samples: int = 1024) -> float:
    """Half-sum of the off-diagonal windings on the unit circle.

    Takes the values 0, 1/2 or 1 for this model; the half-integer plateau
    appears where only one of ``q+``, ``q-`` encircles the origin.
    """
    if n_samples < 256:
        raise ValueError("bloch_winding needs n_samples >= 256")
    w_plus, w_minus = offdiagonal_windings(params, 1.0, n_samples)
    return 0.5 * (w_plus + w_minus)


def q_factor(params: LatticeParams, betas: np.ndarray) -> np.ndarray:
    """Off-diagonal entry ``q`` of the Q matrix at each beta.

    For every beta the non-Bloch Hamiltonian is diagonalized numerically; left
    eigenvectors come from an independent diagonalization of ``H^dagger`` and
    are normalized biorthogonally against the right ones. The band with
    ``Re E > 0`` (ties: ``Im E < 0``) supplies ``|u_R><u_L|`` and its chiral
    image ``sigma_z u`` supplies the other term.
    """
    betas = np.asarray(betas, dtype=complex)
    if np.any(betas == 0):
        raise ValueError("beta = 0 is not allowed")
    upper, lower = offdiagonal_factors(params, betas)
    n = betas.size
    H = np.zeros((n, 2, 2), dtype=complex)
    H[:, 0, 1] = upper
    H[:, 1, 0] = lower

    E, VR = np.linalg.eig(H)
    El, VL = np.linalg.eig(np.conj(np.swapaxes(H, 1, 2)))

    # band selection
    key = np.where(np.abs(E.real) > 1e-14, E.real, -E.imag)
    pick = np.argmax(key, axis=1)
    rows = np.arange(n)
    e_sel = E[rows, pick]
    u_r = VR[rows, :, pick]
    # left partner: eigenvector of H^dagger with eigenvalue conj(E)
    match = np.argmin(np.abs(El - np.conj(e_sel)[:, None]), axis=1)
    u_l = VL[rows, :, match]

    overlap = np.einsum("ni,ni->n", np.conj(u_l), u_r)
    if np.min(np.abs(overlap)) < BIORTH_TOL:
        raise BiorthogonalBreakdown(
            f"<u_L|u_R> vanishes on the contour at v = {params.v:g} (exceptional point)"
        )
    u_l = u_l / np.conj(overlap)[:, None]

    ut_r = u_r @ SIGMA_Z.T
    ut_l = u_l @ SIGMA_Z.T
    Q = np.einsum("ni,nj->nij", ut_r, np.conj(ut_l)) - np.einsum(
        "ni,nj->nij", u_r, np.conj(u_l)
    )
    return Q[:, 0, 1]


def nonbloch_winding(params: LatticeParams, n_samples: int = 1024) -> int:
    """Winding ``(i/2pi) \\oint q^{-1} dq`` of the Q-matrix factor along the GBZ.

    The band label of ``Q`` may switch along the contour, which flips the sign
    of ``q``; phase steps are therefore taken modulo pi. Raises if the rounded
    value is more than 0.01 away from an integer.
    """
    if n_samples < 512:
        raise ValueError("nonbloch_winding needs n_samples >= 512")
    radius = gbz_radius(params)
    _check_gap(params, radius)
    phase, _ = _contour_phase(
        lambda th: q_factor(params, radius * np.exp(1j * th)), n_samples, np.pi
    )
    w = -phase / (2 * np.pi)
    nearest = round(w)
    if abs(w - nearest) >= 0.01:
        raise LossyWalkError(f"non-Bloch winding {w:.4f} is not close to an integer")
    return int(nearest)


def winding_point(params: LatticeParams, n_bloch: int = 1024, n_nonbloch: int = 1024) -> WindingResult:
    errors = []
    try:
        bw = bloch_winding(params, n_bloch)
    except LossyWalkError as exc:
        bw = None
        errors.append(f"bloch_winding: {type(exc).__name__}: {exc}")
    try:
        radius = gbz_radius(params)
    except DegenerateGBZ as exc:
        radius = None
        errors.append(f"gbz_radius: {type(exc).__name__}: {exc}")
    nw = None
    if radius is not None:
        try:
            nw = nonbloch_winding(params, n_nonbloch)
        except LossyWalkError as exc:
            errors.append(f"nonbloch_winding: {type(exc).__name__}: {exc}")
    return WindingResult(
        v=params.v,
        bloch_w=bw,
        nonbloch_w=nw,
        gbz_radius=radius,
        n_samples=n_nonbloch,
        errors=tuple(errors),
    )


def winding_scan(template: LatticeParams, v_values, n_bloch: int = 1024, n_nonbloch: int = 1024):
    """Bloch and non-Bloch windings for every v; failures are recorded per point."""
    return [winding_point(template.with_v(v), n_bloch, n_nonbloch) for v in v_values]


def nonbloch_transition(template: LatticeParams, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Bisect for the v where the non-Bloch winding changes between ``lo`` and ``hi``.

    A gap closure hit exactly at a midpoint is the transition itself.
    """
    w_lo = nonbloch_winding(template.with_v(lo))
    w_hi = nonbloch_winding(template.with_v(hi))
    if w_lo == w_hi:
        raise ValueError(f"no winding change on [{lo}, {hi}] (both {w_lo})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        try:
            w_mid = nonbloch_winding(template.with_v(mid))
        except GapClosed:
            return mid
        if w_mid == w_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
