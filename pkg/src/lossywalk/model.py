"""Hamiltonians of the lossy bipartite chain.

Conventions used everywhere in the package:

* Basis ordering is interleaved, ``(1A, 1B, 2A, 2B, ...)``; the flat index of
  ``(cell, sublattice)`` is ``2*(cell-1) + sublattice`` with ``A=0, B=1``.
* Rightward hops along the A chain carry ``+i r/2`` (``H[(m+1)A, mA]``) and
  rightward hops along the B chain carry ``-i r/2``. With this choice a walker
  with positive intracell hopping ``v`` drifts to the LEFT edge. The conjugate
  convention mirrors every result, ``m -> L+1-m``.
* hbar = 1; all energies and rates are dimensionless.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .errors import InvalidParams

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = (SIGMA_X + 1j * SIGMA_Y) / 2
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2
IDENTITY2 = np.eye(2, dtype=complex)

# exp(i pi sigma_x / 4): maps sigma_z -> sigma_y, sigma_x -> sigma_x
CELL_ROTATION = (IDENTITY2 + 1j * SIGMA_X) / np.sqrt(2)


class Sublattice(enum.IntEnum):
    A = 0
    B = 1


@dataclasses.dataclass(frozen=True)
class LatticeParams:
    """Model constants of the chain.

    Parameters
    ----------
    L : int
        Number of unit cells.
    v : float
        Intracell hopping.
    r : float
        Intercell hopping amplitude.
    gamma : float
        Loss rate on every B site.
    origin : int, optional
        Unit cell (1-based) where the walker starts. Defaults to the center
        cell ``(L+1)//2``, which is 26 for ``L=51``.
    """

    L: int = 51
    v: float = 0.0
    r: float = 0.5
    gamma: float = 1.0
    origin: int | None = None

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 1:
            raise InvalidParams(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        if not self.gamma >= 0:
            raise InvalidParams(f"gamma must be non-negative, got {self.gamma!r}")
        for name in ("v", "r", "gamma"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise InvalidParams(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        origin = (self.L + 1) // 2 if self.origin is None else self.origin
        if int(origin) != origin or not 1 <= origin <= self.L:
            raise InvalidParams(f"origin must lie in [1, {self.L}], got {origin!r}")
        object.__setattr__(self, "origin", int(origin))

    def with_v(self, v: float) -> "LatticeParams":
        return dataclasses.replace(self, v=float(v))

    @property
    def dim(self) -> int:
        return 2 * self.L


def flat_index(cell: int, sublattice: Sublattice | int) -> int:
    """Flat basis index of site ``(cell, sublattice)``; ``cell`` is 1-based."""
    if cell < 1:
        raise IndexError(f"cell index starts at 1, got {cell}")
    return 2 * (cell - 1) + int(Sublattice(sublattice))


def site_of(index: int) -> tuple[int, Sublattice]:
    """Inverse of :func:`flat_index`."""
    if index < 0:
        raise IndexError(f"negative flat index {index}")
    return index // 2 + 1, Sublattice(index % 2)


def build_real_space_hamiltonian(params: LatticeParams) -> np.ndarray:
    """Dense ``2L x 2L`` open-boundary Hamiltonian."""
    L, v, r, g = params.L, params.v, params.r, params.gamma
    H = np.zeros((2 * L, 2 * L), dtype=complex)
    a = np.arange(0, 2 * L, 2)
    b = a + 1
    H[b, b] = -0.5j * g
    H[a, b] = v
    H[b, a] = v
    # intercell bonds m -> m+1
    a0, a1 = a[:-1], a[1:]
    b0, b1 = b[:-1], b[1:]
    H[a1, a0] = 0.5j * r
    H[a0, a1] = -0.5j * r
    H[b1, b0] = -0.5j * r
    H[b0, b1] = 0.5j * r
    H[a1, b0] = H[b0, a1] = 0.5 * r
    H[b1, a0] = H[a0, b1] = 0.5 * r
    return H


def b_projector(params: LatticeParams) -> np.ndarray:
    """Diagonal projector onto all B sites."""
    P = np.zeros((params.dim, params.dim))
    P[1::2, 1::2] = np.eye(params.L)
    return P


def bloch_hamiltonian(params: LatticeParams, k: float) -> np.ndarray:
    hx = params.v + params.r * np.cos(k)
    hz = params.r * np.sin(k)
    quarter = 0.25j * params.gamma
    return hx * SIGMA_X + (hz + quarter) * SIGMA_Z - quarter * IDENTITY2


def offdiagonal_factors(params: LatticeParams, beta) -> tuple:
    """Upper-right and lower-left entries of the non-Bloch Hamiltonian.

    ``(v + gamma/4 + r/beta, v - gamma/4 + r*beta)``; works on arrays of beta.
    """
    beta = np.asarray(beta, dtype=complex)
    q = params.gamma / 4
    return params.v + q + params.r / beta, params.v - q + params.r * beta


def nonbloch_hamiltonian(params: LatticeParams, beta: complex) -> np.ndarray:
    if beta == 0:
        raise InvalidParams("beta = 0 is a pole of the non-Bloch Hamiltonian")
    upper, lower = offdiagonal_factors(params, beta)
    return complex(upper) * SIGMA_PLUS + complex(lower) * SIGMA_MINUS


def rotated_bloch_hamiltonian(params: LatticeParams, k: float) -> np.ndarray:
    """Bloch Hamiltonian after removing the ``-i gamma/4`` offset and rotating
    ``sigma_z -> sigma_y``; equal to the non-Bloch form at ``beta = exp(ik)``."""
    return nonbloch_hamiltonian(params, np.exp(1j * k))


def chiral_frame_hamiltonian(params: LatticeParams) -> np.ndarray:
    """Real-space counterpart of the rotated Bloch Hamiltonian.

    Returns ``R (H + i gamma/4) R^dagger`` with ``R`` the cell rotation applied
    in every unit cell. The result only couples A to B sites.
    """
    H = build_real_space_hamiltonian(params)
    H = H + 0.25j * params.gamma * np.eye(params.dim)
    R = np.kron(np.eye(params.L), CELL_ROTATION)
    return R @ H @ R.conj().T
