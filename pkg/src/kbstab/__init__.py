"""Stability-certified nonlinear Kalman and Kalman-Bucy filtering.

The package couples a generalized filter family (point-evaluation,
assumed-density, and sigma-point variants over a common functional
interface) with a priori stability certificates: time-uniform mean-square
error bounds and exponential concentration thresholds, in continuous and
discrete time, validated by seeded Monte Carlo experiments.
"""

from ._version import __version__
from .errors import (
    CertificateError,
    ConfigError,
    DegenerateCovarianceError,
    DivergenceError,
    ExperimentDivergenceError,
    IndefiniteMatrixError,
    KbstabError,
    NoCertificateError,
    NotContractiveError,
    NotFullyObservedError,
)
from .matrix_measures import (
    LogLipschitzEstimate,
    log_lipschitz_estimate,
    log_norm_mu,
    log_norm_nu,
    spectral_norm,
)
from .quadrature import (
    CubatureRule,
    check_degree_two_exactness,
    default_unscented_kappa,
    gauss_hermite_rule,
    matrix_sqrt,
    unscented_rule,
)
from .functionals import (
    AssumptionCheckReport,
    MeanFunctional,
    RiccatiFunctional,
    check_assumption_continuous,
    check_assumption_discrete,
    eval_mean,
    eval_riccati_cont,
    eval_riccati_disc,
    mean_functional,
    riccati_functional,
)
from .models import (
    ContinuousModel,
    DiscreteModel,
    SimulatedPath,
    builtin_contractive3d,
    builtin_discrete_linear,
    builtin_integrated_velocity,
    builtin_linear,
    simulate_discrete_path,
    simulate_path,
    velocity_g,
    velocity_g_prime,
)
from .filters import (
    FilterConfig,
    FilterTrajectory,
    discrete_predict,
    discrete_update,
    kalman_bucy_step,
    make_filter_config,
    run_continuous_filter,
    run_discrete_filter,
)
from .stability import (
    ContinuousCertificate,
    DiscreteCertificate,
    bernstein_threshold,
    beta,
    chi_square_moment_bound,
    continuous_concentration_threshold,
    continuous_mse_bound,
    contractive_certificate,
    discrete_certificate,
    discrete_concentration_threshold,
    discrete_mse_bound,
    gronwall_continuous,
    gronwall_discrete,
    inflation_mineig_bound,
    integrated_velocity_certificate,
    moment_growth_bound,
    naive_vs_filter,
    required_inflation,
)
from .harness import (
    ExperimentResult,
    ExperimentSpec,
    concentration_check,
    export_result,
    preset_spec,
    run_experiment,
)
