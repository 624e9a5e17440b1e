"""Quantum annealing and magnetic hysteresis in disordered dipolar XY spin systems.

Modules
-------
geometry      hard-sphere positions, dipolar couplings, disorder statistics
operators     sparse spin operators, the XY Hamiltonian, parity sectors
evolution     Krylov/Magnus propagation under piecewise-linear field schedules
protocols     ZFA/FA annealing sequences, energy scans, susceptibility fits
spectra       exact diagonalization, level diagrams, magnetization spectra
verification  closed-form references (single-spin Kubo response, spin pair)
ensemble      seeded disorder ensembles and their statistics
harness       JSON configurations and the ``xyanneal`` command line
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AttemptsExhausted,
    BadGrid,
    DegenerateGeometry,
    DimensionTooLarge,
    EnsembleFailed,
    NonFiniteState,
    NormDrift,
    ParseError,
    SectorInvalid,
    ValidationError,
    XYAnnealError,
)
from .geometry import (  # noqa: E402
    CouplingMatrix,
    DisorderStats,
    PositionSet,
    SamplingConfig,
    compute_couplings,
    disorder_stats,
    sample_positions,
)
from .operators import (  # noqa: E402
    ManyBodyOperator,
    ParitySector,
    StateVector,
    XYModel,
    build_hamiltonian,
    parity_decompose,
    polarized_state,
    total_spin,
)
from .evolution import FieldSchedule, Segment, Trajectory, propagate  # noqa: E402
from .protocols import (  # noqa: E402
    ProtocolParams,
    build_schedule,
    fit_susceptibility,
    hysteresis_sweep,
    run_protocol,
    scan_energy,
)
from .spectra import diagonalize, ground_state_energy, level_diagram, magnetization_spectrum  # noqa: E402
from .verification import KuboParams, kubo_single_spin, kubo_vs_dynamics, two_spin_reference  # noqa: E402
from .ensemble import EnsembleConfig, EnsembleSummary, derive_seed, run_ensemble  # noqa: E402
