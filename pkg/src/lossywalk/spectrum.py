"""Open-boundary spectra and edge-state classification.

The open-chain Hamiltonian is strongly non-normal away from ``v = 0``: its
eigenvectors pile up at one edge with a ratio set by the GBZ radius, and a
plain dense eigensolver loses most of its digits on the eigenvalues
(condition numbers reach 1e26 at ``L = 51``). :func:`open_boundary_spectrum`
therefore diagonalizes the similar matrix ``D R (H + i gamma/4) R^dagger D^-1``,
where ``R`` is the per-cell rotation and ``D`` rescales cell ``m`` by
``gbz_radius**-m``. That matrix is close to normal, its eigenvalues are
accurate, and the eigenvectors are mapped back to the original basis.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy.linalg

from .errors import DegenerateGBZ, SolverFailure
from .model import CELL_ROTATION, LatticeParams, build_real_space_hamiltonian, chiral_frame_hamiltonian
from .topology import gbz_radius

# clamp on the per-cell scaling ratio; v = +/-gamma/4 has radius 0 or infinity
MIN_RATIO = 1e-3
# in-gap states span a rotatable subspace only if their smallest singular value exceeds this
SPAN_CONDITION = 0.5
# eigenpairs with ||H u - E u|| above this times ||H|| are refined
RESIDUAL_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class EdgeCriteria:
    """Thresholds that decide whether an eigenstate is an edge state.

    A state qualifies if its distance from the chiral center is separated from
    the bulk (the nearest bulk state is more than ``gap_factor`` times further
    away) and more than ``weight_threshold`` of its probability sits in the
    first or last ``edge_cells`` unit cells.
    """

    edge_cells: int = 3
    weight_threshold: float = 0.6
    gap_factor: float = 3.0

    def __post_init__(self):
        if self.edge_cells < 1:
            raise ValueError("edge_cells must be positive")
        if not 0 < self.weight_threshold < 1:
            raise ValueError("weight_threshold must lie in (0, 1)")
        if not self.gap_factor > 1:
            raise ValueError("gap_factor must exceed 1")


@dataclasses.dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray  # columns, unit 2-norm
    edge_flags: np.ndarray
    v: float | None = None
    chiral_center: complex = 0.0
    edge_sides: tuple = ()
    edge_weights: np.ndarray | None = None  # (n, 2): left and right cell weight
    edge_candidates: np.ndarray | None = None  # gap-separated indices, ascending
    edge_vectors: np.ndarray | None = None  # one column per candidate
    left_eigenvectors: np.ndarray | None = None

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.edge_flags))

    def sides(self) -> list[str]:
        return [s for s, f in zip(self.edge_sides, self.edge_flags) if f]


def _sorted(E, *vectors):
    order = np.lexsort((E.imag, E.real))
    return (E[order],) + tuple(None if V is None else V[:, order] for V in vectors)


def eigensystem(H: np.ndarray, left: bool = False, v: float | None = None) -> SpectrumResult:
    """Dense eigendecomposition of a general complex matrix.

    Right eigenvectors are normalized to unit 2-norm; with ``left=True`` left
    eigenvectors are returned as well, scaled so that ``<u_L|u_R> = 1``.
    Eigenvalues are sorted by real part, then imaginary part.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"square matrix required, got shape {H.shape}")
    try:
        if left:
            E, VL, VR = scipy.linalg.eig(H, left=True, right=True)
        else:
            E, VR = scipy.linalg.eig(H)
            VL = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverFailure(f"eigendecomposition failed: {exc}", v=v) from exc
    if not np.all(np.isfinite(E)):
        raise SolverFailure("eigendecomposition returned non-finite eigenvalues", v=v)
    VR = VR / np.linalg.norm(VR, axis=0)
    if VL is not None:
        VL = VL / np.conj(np.einsum("ij,ij->j", np.conj(VL), VR))
    E, VR, VL = _sorted(E, VR, VL)
    return SpectrumResult(
        eigenvalues=E,
        right_eigenvectors=VR,
        edge_flags=np.zeros(E.size, dtype=bool),
        v=v,
        left_eigenvectors=VL,
    )


def balancing_scales(params: LatticeParams) -> np.ndarray:
    """Diagonal of ``D``: ``ratio**-m`` on A of cell m and ``ratio**-(m+1)`` on B.

    ``ratio`` is the GBZ radius, clamped to ``[MIN_RATIO, 1/MIN_RATIO]``;
    exponents are centered on the middle cell to keep the range symmetric.
    """
    try:
        ratio = gbz_radius(params)
    except DegenerateGBZ:
        ratio = MIN_RATIO if abs(params.v - params.gamma / 4) < abs(params.v + params.gamma / 4) else 1 / MIN_RATIO
    ratio = min(max(ratio, MIN_RATIO), 1 / MIN_RATIO)
    m = np.arange(params.L) - (params.L - 1) / 2
    scales = np.empty(params.dim)
    scales[0::2] = ratio ** (-m)
    scales[1::2] = ratio ** (-(m + 1))
    return scales


def _refine_vectors(H: np.ndarray, E: np.ndarray, U: np.ndarray, steps: int = 3) -> np.ndarray:
    """Inverse iteration on ``H`` for columns whose residual is too large.

    The balancing is tuned to bulk states; the near-zero chiral pair decays at
    a different rate and can come back with only a few correct digits.
    """
    tol = RESIDUAL_TOL * np.linalg.norm(H, 2)
    res = np.linalg.norm(H @ U - U * E, axis=0)
    eye = np.eye(H.shape[0])
    for j in np.nonzero(res > tol)[0]:
        x = U[:, j]
        # nudge the shift so the factorization stays finite at an exact eigenvalue
        shift = E[j] + tol * 1e-3
        lu = scipy.linalg.lu_factor(H - shift * eye, check_finite=False)
        for _ in range(steps):
            x = scipy.linalg.lu_solve(lu, x, check_finite=False)
            x = x / np.linalg.norm(x)
            if np.linalg.norm(H @ x - E[j] * x) <= tol:
                break
        U[:, j] = x
    return U


def open_boundary_spectrum(
    params: LatticeParams,
    crit: EdgeCriteria | None = EdgeCriteria(),
    balanced: bool = True,
) -> SpectrumResult:
    """Spectrum of the open chain, optionally with edge states classified.

    ``balanced=False`` falls back to the plain dense solver on ``H``.
    """
    center = -0.25j * params.gamma
    if not balanced:
        result = eigensystem(build_real_space_hamiltonian(params), v=params.v)
    else:
        d = balancing_scales(params)
        Hc = chiral_frame_hamiltonian(params)
        try:
            lam, W = scipy.linalg.eig(d[:, None] * Hc / d[None, :])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverFailure(f"eigendecomposition failed: {exc}", v=params.v) from exc
        if not np.all(np.isfinite(lam)):
            raise SolverFailure("eigendecomposition returned non-finite eigenvalues", v=params.v)
        # back to the original basis: u = R^dagger D^-1 w, cell by cell
        X = (W / d[:, None]).reshape(params.L, 2, -1)
        U = np.einsum("ij,mjn->min", CELL_ROTATION.conj().T, X).reshape(params.dim, -1)
        U = U / np.linalg.norm(U, axis=0)
        E = lam + center
        U = _refine_vectors(build_real_space_hamiltonian(params), E, U)
        E, U = _sorted(E, U)
        result = SpectrumResult(
            eigenvalues=E,
            right_eigenvectors=U,
            edge_flags=np.zeros(E.size, dtype=bool),
            v=params.v,
        )
    result = dataclasses.replace(result, chiral_center=center)
    if crit is not None:
        result = classify_edge_states(result, crit)
    return result


def cell_weights(vectors: np.ndarray) -> np.ndarray:
    """Per-cell population ``|psi_A|^2 + |psi_B|^2`` of each column."""
    p = np.abs(vectors) ** 2
    return p[0::2] + p[1::2]


def _gap_separated(distance: np.ndarray, gap_factor: float) -> np.ndarray:
    """Indices of states separated from the bulk by a multiplicative gap.

    With distances sorted ascending, the bulk starts at the largest index k in
    the lower half of the spectrum with ``a[k] > gap_factor * a[k-1]``.
    """
    order = np.argsort(distance, kind="stable")
    a = distance[order]
    half = a.size // 2
    jumps = [k for k in range(1, half + 1) if a[k] > gap_factor * a[k - 1]]
    if not jumps:
        return np.array([], dtype=int)
    return order[: jumps[-1]]


def _localized_basis(vectors: np.ndarray, edge_cells: int) -> np.ndarray | None:
    """Basis of span(vectors) that diagonalizes left-minus-right edge weight.

    Returns ``None`` when the vectors are nearly parallel; that happens when
    the in-gap pair is effectively defective and there is no second direction
    to resolve.
    """
    Q, _ = np.linalg.qr(vectors)
    s = np.linalg.svd(vectors, compute_uv=False)
    if s[-1] < SPAN_CONDITION:
        return None
    L = vectors.shape[0] // 2
    mask = np.zeros(L)
    mask[:edge_cells] += 1
    mask[-edge_cells:] -= 1
    weight = np.repeat(mask, 2)
    A = Q.conj().T @ (weight[:, None] * Q)
    _, C = np.linalg.eigh(A)
    return Q @ C


def classify_edge_states(result: SpectrumResult, crit: EdgeCriteria = EdgeCriteria()) -> SpectrumResult:
    """Flag edge states and record which edge carries them.

    Gap separation is measured from ``result.chiral_center``, the point the
    spectrum is symmetric about (``-i gamma/4`` for the lossy chain). When the
    in-gap states span a well-conditioned subspace (near-degenerate partners
    that hybridize at finite L), each of them is judged by the member of the
    maximally edge-resolved basis of that span, taken in energy order.
    """
    E = result.eigenvalues
    U = result.right_eigenvectors
    n = E.size
    L = n // 2
    k = min(crit.edge_cells, L)

    weights = cell_weights(U)
    lr = np.column_stack([weights[:k].sum(axis=0), weights[-k:].sum(axis=0)])

    candidates = _gap_separated(np.abs(E - result.chiral_center), crit.gap_factor)
    candidates = np.sort(candidates)
    edge_vectors = U[:, candidates]
    if candidates.size >= 2:
        basis = _localized_basis(edge_vectors, k)
        if basis is not None:
            edge_vectors = basis
            w = cell_weights(basis)
            lr[candidates] = np.column_stack([w[:k].sum(axis=0), w[-k:].sum(axis=0)])

    flags = np.zeros(n, dtype=bool)
    sides = [None] * n
    thr = crit.weight_threshold
    for idx in candidates:
        left, right = lr[idx]
        if left > thr and right > thr:
            sides[idx] = "both"
        elif left > thr:
            sides[idx] = "left"
        elif right > thr:
            sides[idx] = "right"
        flags[idx] = sides[idx] is not None
    return dataclasses.replace(
        result,
        edge_flags=flags,
        edge_sides=tuple(sides),
        edge_weights=lr,
        edge_candidates=candidates,
        edge_vectors=edge_vectors,
    )


def edge_profiles(result: SpectrumResult) -> tuple[np.ndarray, float]:
    """Cell populations of the flagged edge states and their largest pointwise gap.

    Returns ``(profiles, max_diff)``; ``profiles`` has one column per flagged
    edge state and ``max_diff`` is the largest difference between any two
    columns (0 for fewer than two states).
    """
    L = result.eigenvalues.size // 2
    if result.edge_vectors is None or not np.any(result.edge_flags):
        return np.zeros((L, 0)), 0.0
    keep = [j for j, idx in enumerate(result.edge_candidates) if result.edge_flags[idx]]
    profiles = cell_weights(result.edge_vectors[:, keep])
    if profiles.shape[1] < 2:
        return profiles, 0.0
    diffs = [
        np.max(np.abs(profiles[:, i] - profiles[:, j]))
        for i in range(profiles.shape[1])
        for j in range(i + 1, profiles.shape[1])
    ]
    return profiles, float(max(diffs))


def _scan_point(args):
    params, crit, balanced = args
    return open_boundary_spectrum(params, crit, balanced)


def spectrum_scan(
    template: LatticeParams,
    v_values,
    crit: EdgeCriteria = EdgeCriteria(),
    balanced: bool = True,
    workers: int = 1,
) -> list[SpectrumResult]:
    """One classified spectrum per v. Failures carry the offending v."""
    v_values = list(v_values)
    if not v_values:
        raise ValueError("v_values must be non-empty")
    jobs = [(template.with_v(v), crit, balanced) for v in v_values]
    if workers <= 1:
        return [_scan_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scan_point, jobs))
