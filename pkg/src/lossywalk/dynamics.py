"""Non-unitary walker dynamics and the per-cell decay probabilities.

The walker obeys ``i dpsi/dt = H psi`` with the lossy Hamiltonian of
:mod:`lossywalk.model`. The norm leaks only through B sites,

    d<psi|psi>/dt = -gamma * sum_m |psi_m^B|^2,

so the probability that leaves through cell ``m`` over the whole evolution is
``P_m = gamma * int_0^inf |psi_m^B(t)|^2 dt``. Two independent routes compute
it: a closed form over the right eigenbasis, and fixed-step fourth-order
integration with trapezoid quadrature.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrum, DtTooLarge, LossyWalkError, NearDarkState, NotConverged
from .model import LatticeParams, Sublattice, build_real_space_hamiltonian, flat_index

log = logging.getLogger(__name__)

SPECTRAL = "spectral"
STEPPING = "time-stepping"


@dataclasses.dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    time: float = 0.0

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclasses.dataclass(frozen=True)
class DecayRecord:
    """Per-cell decay probabilities of one run.

    ``P`` is never renormalized; ``sum(P) + residual == 1`` up to integration
    error, where ``residual`` is the norm left on the lattice at ``t_stop``.
    """

    P: np.ndarray
    residual: float
    t_stop: float
    method: str

    @property
    def total(self) -> float:
        return float(np.sum(self.P)) + self.residual


@dataclasses.dataclass(frozen=True)
class EvolveConfig:
    """Integration controls.

    ``quadrature`` selects the route: ``"closed-form"`` forces the spectral
    expansion, ``"trapezoid"`` forces time stepping, ``None`` lets
    :func:`decay_distribution` choose.
    """

    stop_norm: float = 1e-8
    dt: float = 0.01
    t_max: float = 1e5
    quadrature: str | None = None
    dark_threshold: float = 1e-10
    cond_max: float = 1e8

    def __post_init__(self):
        if not 0 < self.stop_norm < 1:
            raise ValueError(f"stop_norm must lie in (0, 1), got {self.stop_norm}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.quadrature not in (None, "closed-form", "trapezoid"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")


def initial_state(params: LatticeParams) -> StateVector:
    """Walker on the A site of the origin cell."""
    psi = np.zeros(params.dim, dtype=complex)
    psi[flat_index(params.origin, Sublattice.A)] = 1.0
    return StateVector(psi, 0.0)


def evolve_spectral(params: LatticeParams, config: EvolveConfig = EvolveConfig()) -> DecayRecord:
    """Closed-form decay probabilities from the right eigenbasis.

    With ``psi(t) = sum_n c_n exp(-i E_n t) u_n`` the time integral of every
    cross term is ``int_0^inf exp(-i (E_n - E_n'^*) t) dt = -i / (E_n - E_n'^*)``,
    finite because all eigenvalues lie strictly below the real axis.
    """
    H = build_real_space_hamiltonian(params)
    E, U = scipy.linalg.eig(H)
    if np.min(np.abs(E.imag)) < config.dark_threshold:
        raise NearDarkState(
            f"eigenvalue with |Im E| = {np.min(np.abs(E.imag)):.3g} below {config.dark_threshold:g}"
        )
    U = U / np.linalg.norm(U, axis=0)
    cond = np.linalg.cond(U)
    if not cond <= config.cond_max:
        raise DegenerateSpectrum(f"eigenvector condition number {cond:.3g} exceeds {config.cond_max:g}")

    c = np.linalg.solve(U, initial_state(params).amplitudes)
    UB = U[1::2, :] * c  # B amplitude of each mode in every cell, weighted by c_n
    kernel = -1j / (E[:, None] - np.conj(E)[None, :])
    P = params.gamma * np.einsum("mi,ij,mj->m", UB, kernel, np.conj(UB)).real
    if np.min(P) < -1e-12:
        raise DegenerateSpectrum(f"closed form produced P_m = {np.min(P):.3g} < 0")
    P = np.maximum(P, 0.0)
    return DecayRecord(P=P, residual=0.0, t_stop=float("inf"), method=SPECTRAL)


def step_propagator(H: np.ndarray, dt: float) -> np.ndarray:
    """One step of the two-stage Gauss-Legendre method for ``dpsi/dt = -i H psi``.

    For a constant linear generator the method is the diagonal (2,2) Pade
    approximant of ``exp(-i H dt)``: fourth order, exactly norm preserving
    when ``H`` is Hermitian and norm non-increasing when the anti-Hermitian
    part of ``H`` is negative semidefinite. Classical RK4 lacks both
    properties and drifts by ``~(|E| dt)**6 / 72`` per step.
    """
    A = -1j * dt * H
    eye = np.eye(H.shape[0], dtype=complex)
    A2 = A @ A / 12
    return np.linalg.solve(eye - A / 2 + A2, eye + A / 2 + A2)


def stepping_trajectory(params: LatticeParams, dt: float, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """States at ``t = 0, dt, ..., n_steps*dt`` from plain step-by-step propagation."""
    T = step_propagator(build_real_space_hamiltonian(params), dt)
    states = np.empty((n_steps + 1, params.dim), dtype=complex)
    states[0] = initial_state(params).amplitudes
    for j in range(n_steps):
        states[j + 1] = T @ states[j]
    return dt * np.arange(n_steps + 1), states


def evolve_stepping(
    params: LatticeParams,
    config: EvolveConfig = EvolveConfig(),
    block: int = 64,
    chunk: int = 64,
) -> DecayRecord:
    """Fixed-step integration until the norm drops below ``stop_norm``.

    The scheme is the map ``psi_{j+1} = T psi_j`` with ``T`` from
    :func:`step_propagator`. To keep the
    cost down the trajectory is produced a chunk at a time: block-start states
    ``psi_{bK}`` are advanced with ``T^K`` and the inner steps of all blocks in
    the chunk come from one product with the stacked powers ``T, ..., T^K``.
    """
    H = build_real_space_hamiltonian(params)
    n = params.dim
    dt = config.dt
    radius = np.max(np.abs(np.linalg.eigvals(H)))
    if dt * radius > 0.1:
        raise DtTooLarge(f"dt * spectral radius = {dt * radius:.3g} exceeds 0.1")

    T = step_propagator(H, dt)
    powers = [T]
    for _ in range(block - 1):
        powers.append(T @ powers[-1])
    stacked = np.vstack(powers)
    T_block = powers[-1]

    g = params.gamma
    psi = initial_state(params).amplitudes
    f_prev = g * np.abs(psi[1::2]) ** 2
    norm_prev = 1.0
    P = np.zeros(params.L)
    steps = 0
    max_steps = int(np.ceil(config.t_max / dt))

    while True:
        starts = [psi]
        for _ in range(chunk - 1):
            starts.append(T_block @ starts[-1])
        S = np.column_stack(starts)
        traj = (stacked @ S).reshape(block, n, chunk).transpose(2, 0, 1).reshape(block * chunk, n)

        remaining = max_steps - steps
        if traj.shape[0] > remaining:
            traj = traj[:remaining]
        norms = np.sum(np.abs(traj) ** 2, axis=1)
        if g > 0:
            jumps = np.diff(np.concatenate(([norm_prev], norms)))
            if np.max(jumps) > 1e-12:
                at = steps + int(np.argmax(jumps)) + 1
                raise DtTooLarge(f"norm grew by {np.max(jumps):.3g} at t = {at * dt:g}; reduce dt")
        hit = np.nonzero(norms <= config.stop_norm)[0]
        used = hit[0] + 1 if hit.size else traj.shape[0]

        f = g * np.abs(traj[:used, 1::2]) ** 2
        P += dt * (0.5 * f_prev + f[:-1].sum(axis=0) + 0.5 * f[-1])
        f_prev = f[-1]
        psi = traj[used - 1]
        norm_prev = norms[used - 1]
        steps += used

        if hit.size:
            return DecayRecord(P=P, residual=float(norm_prev), t_stop=steps * dt, method=STEPPING)
        if steps >= max_steps:
            raise NotConverged(
                f"t_max = {config.t_max:g} reached with norm^2 = {norm_prev:.3g} > {config.stop_norm:g}",
                residual=float(norm_prev),
                t=steps * dt,
            )


CONSERVATION_TOL = 1e-9


def decay_distribution(params: LatticeParams, config: EvolveConfig = EvolveConfig()) -> DecayRecord:
    """Decay probabilities by the best applicable route.

    The closed form is used unless a mode is nearly dark, the eigenbasis is
    ill-conditioned, or the result fails the conservation check; otherwise the
    walker is integrated in time.
    """
    if config.quadrature == "closed-form":
        return evolve_spectral(params, config)
    if config.quadrature == "trapezoid":
        return evolve_stepping(params, config)
    try:
        record = evolve_spectral(params, config)
    except (NearDarkState, DegenerateSpectrum, np.linalg.LinAlgError) as exc:
        log.debug("v=%g: falling back to time stepping (%s)", params.v, exc)
        return evolve_stepping(params, config)
    if abs(record.total - 1) > CONSERVATION_TOL:
        log.debug("v=%g: closed form failed conservation check, stepping instead", params.v)
        return evolve_stepping(params, config)
    return record


def imbalance(record: DecayRecord) -> float:
    """Leftmost minus rightmost decay probability."""
    return float(record.P[0] - record.P[-1])


__all__ = [
    "StateVector",
    "DecayRecord",
    "EvolveConfig",
    "initial_state",
    "evolve_spectral",
    "evolve_stepping",
    "stepping_trajectory",
    "decay_distribution",
    "imbalance",
    "LossyWalkError",
]
