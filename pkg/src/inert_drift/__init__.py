"""Reflected Brownian motion with local-time dependent drift and inert particles."""

from .errors import (
    BlowUpError,
    DomainAssumptionError,
    InertDriftError,
    InsufficientData,
    InvalidArgument,
    NonConvergenceError,
    NumericalFailure,
    StepFailure,
)
from .interval import (
    IntervalTrajectory,
    VelocityChain,
    apply_adjoint,
    apply_generator,
    rescale_to_ou,
    simulate_interval,
    simulate_velocity_chain,
    stationary_density,
    velocity_chain,
)
from .multidim import GraphDomain, ReflectedSolutionND, extended_solve_nd, inner_reflection_step, verify_nd
from .observables import (
    decompose_excursions,
    escape_survival,
    estimate_crossing_rate,
    estimate_tau_infty,
    excursion_density,
    level_crossing_rate,
    occupation_local_time,
)
from .paths import (
    DriftSpec,
    RngConfig,
    SampledPath,
    generate_brownian_path,
    make_drift,
    validate_drift,
)
from .skorohod import ReflectedSolution, bridge_minima, classic_map, extended_solve, refine_until, verify_solution
from .stats import ECDF, Report, autocorrelation, ecdf, ks_distance, ks_two_sample
from .three_particle import (
    ThreeTrajectory,
    bessel2_cdf,
    bessel2_reference,
    gap_chain,
    scale_trajectory,
    scaling_transport,
    simulate_three,
    terminal_gaps,
)

__version__ = "0.1.0"
