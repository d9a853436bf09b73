"""Quantum optical binding of two tweezer-trapped nanoparticles.

Layers: `fields` (microscopic optics: tweezer fields, dipole Green tensor,
potentials, scattering amplitudes, mean forces), `linearize` (coupling rates
and recoil diffusion of the quadratic dynamics), `gaussian` (two-mode Gaussian
propagation, entanglement witness, truncated-Fock oracle), `modes`
(non-Hermitian mode analysis, exceptional points, regime maps), `stochastic`
(Langevin ensembles, homodyne conditioning, LOCC feed-forward, squeezing
drive) and `cli` (the `optibind` command-line front end).
"""

__version__ = "0.1.0"

from .constants import CONSTANTS, Constants
from .fields import (
    Particle,
    ScatterDirection,
    TweezerPair,
    binding_force,
    binding_potential,
    dipole_potential,
    ehrenfest_force,
    ehrenfest_interaction_force,
    green_tensor,
    lindblad_amplitude,
    make_tweezer_pair,
    scatter_direction,
    tweezer_field,
)
from .gaussian import (
    DriftDiffusion,
    FockState,
    GaussianState,
    build_drift_diffusion,
    evolve_gaussian,
    evolve_history,
    fock_coherent_state,
    fock_moments,
    fock_oracle_evolve,
    log_negativity,
    stationary_gaussian,
)
from .linearize import (
    CouplingSet,
    SystemParams,
    coupling_constant_G,
    coupling_rates,
    couplings,
    diffusion_matrix,
    effective_recoil,
    standard_system,
    system_from_tweezers,
)
from .modes import (
    ModeSpectrum,
    RegimeLabel,
    classify_regime,
    dynamical_matrix,
    eigenfrequencies,
    exceptional_points,
    mode_spectrum,
    stationary_occupation_damped_mode,
)
from .stochastic import (
    MeasurementConfig,
    NoiseModel,
    TrajectoryRecord,
    homodyne_conditional_step,
    homodyne_trajectories,
    kraus_step,
    kraus_step_averaged,
    langevin_trajectories,
    locc_feedforward_step,
    locc_feedforward_trajectories,
    squeezing_drive,
)
