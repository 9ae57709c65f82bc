"""Simulation toolkit for the supersymmetric quantum Rabi model.

Spectra and supercharge algebra of the spin-boson Hamiltonian, adiabatic state
preparation, sideband and spin-dependent-force measurements, and partial
spin-phonon tomography with maximum-likelihood reconstruction.
"""

from .exceptions import (
    ConfigInvalid,
    DimensionMismatch,
    FitDiverged,
    IllConditioned,
    NonConvergence,
    NotCommuting,
    NotHermitian,
    StepTooCoarse,
    SusyRabiError,
    TruncationError,
)
from .hilbert import (
    BlockDensity,
    DensityMatrix,
    Operator,
    SpaceDescriptor,
    StateVector,
    cat_state,
    coherent_state,
    displacement_op,
    embed,
    expectation,
    fock_state,
    ladder_operators,
)
from .qrm import (
    PathPoint,
    QrmParams,
    converged_spectrum,
    gap_table,
    parity_op,
    path_hamiltonian,
    qrm_hamiltonian,
    spectrum,
)
from .susy import (
    SusyKind,
    SusyPoint,
    ideal_ground_states,
    supercharge,
    witten_data,
    witten_index,
)
from .dynamics import (
    NoiseModel,
    ProbeSettings,
    QuenchSchedule,
    adiabatic_ground_state,
    dephased_linear_quench,
    lindblad_propagate,
    probe_spectrum,
    propagate,
)
from .measurement import (
    PhononDistributionFitter,
    SdfSettings,
    SdfSlopeFitter,
    Sideband,
    energy_expectation,
    fit_phonon_distribution,
    fit_sdf_slope,
    measure_energy,
    sdf_analytic,
    sdf_evolution,
    sideband_response,
)
from .tomography import (
    BlockTomography,
    ShotTable,
    SpinAxis,
    TomographySettings,
    block_fidelity,
    calibrate_rotation,
    mle_reconstruct,
    monte_carlo_errors,
    reconstruct,
    simulate_shots,
    supercharge_expectation,
)

__version__ = "0.1.0"
