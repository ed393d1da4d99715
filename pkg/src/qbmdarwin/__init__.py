"""Exact Gaussian simulation of a harmonic oscillator in a finite structured bath.

Covers covariance propagation, mutual-information / redundancy diagnostics of
quantum Darwinism and fidelity-based non-Markovianity of the reduced dynamics.
"""

from qbmdarwin.gaussian_core import (
    GaussianState,
    ModeSet,
    check_physical,
    fidelity_single_mode,
    reduce_to_modes,
    symplectic_eigenvalues,
    symplectic_form,
    von_neumann_entropy,
)
from qbmdarwin.bath_model import (
    BathDiscretization,
    Model,
    ModelParams,
    NormalModeBasis,
    SpectralDensityParams,
    discretize,
    initial_state,
    normal_mode_decomposition,
    potential_matrix,
    propagator,
    rubin_spectral_density,
    stability_check,
)
from qbmdarwin.evolution import (
    DecoherenceRecord,
    ReducedChannel,
    decoherence_factor,
    evolve_covariance,
    reduced_channel,
)
from qbmdarwin.darwinism import (
    FragmentSample,
    MutualInfoCurve,
    RedundancyTrace,
    f_delta,
    mutual_info_curve,
    mutual_information,
    non_monotonicity_Nf,
    redundancy_trace,
    sample_fragments,
)
from qbmdarwin.memory import (
    NMResult,
    ProbePair,
    default_probe_pairs,
    fidelity_trajectory,
    nm_measure,
)

from qbmdarwin.experiments import (
    ExperimentConfig,
    run_oracle_check,
    run_partial_info,
    run_redundancy_dynamics,
    run_spectrum_sweep,
)

__version__ = "0.1.0"
