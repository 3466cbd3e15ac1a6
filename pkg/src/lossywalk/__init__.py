"""Lossy quantum walks on a bipartite chain: decay statistics, open-boundary
spectra and Bloch / non-Bloch winding numbers."""

from .dynamics import (
    DecayRecord,
    EvolveConfig,
    StateVector,
    decay_distribution,
    evolve_spectral,
    evolve_stepping,
    imbalance,
    initial_state,
)
from .errors import (
    BiorthogonalBreakdown,
    ConfigError,
    DegenerateGBZ,
    DegenerateSpectrum,
    DtTooLarge,
    GapClosed,
    InvalidParams,
    LossyWalkError,
    NearDarkState,
    NotConverged,
    SolverFailure,
)
from .model import (
    LatticeParams,
    Sublattice,
    bloch_hamiltonian,
    build_real_space_hamiltonian,
    nonbloch_hamiltonian,
    rotated_bloch_hamiltonian,
)
from .spectrum import EdgeCriteria, SpectrumResult, classify_edge_states, open_boundary_spectrum, spectrum_scan
from .topology import (
    WindingResult,
    bloch_winding,
    gbz_radius,
    nonbloch_transition,
    nonbloch_winding,
    winding_scan,
)

__version__ = "0.1.0"
