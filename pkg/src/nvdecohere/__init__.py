"""NV-center electron spin decoherence in a fluctuating electron-spin bath."""
from .analysis import (
    FitResult,
    SweepTable,
    angular_model,
    estimate_brms_from_fid,
    fit_angular,
    fit_exponential,
    fit_power_law,
    redfield_t2,
)
from .dynamics import DecayCurve, SequenceSpec, oracle_propagate, simulate_sequence, toggling_function
from .hamiltonian import (
    FieldVector,
    PhysicalConstants,
    ZfsParams,
    build_hamiltonian,
    exact_transitions,
    perturbation_error,
    perturbative_transitions,
    spin1_operators,
)
from .noise import (
    NoiseParams,
    NoiseTrajectory,
    ShiftModel,
    ou_trajectory,
    renormalized_rms,
    renormalized_shift,
    suppression_factor,
)

__version__ = "0.1.0"
