"""Semi-implicit variational inference with unbiased ELBO gradients.

The variational family mixes a reparameterizable Gaussian conditional over
a network-transformed noise variable. Gradients of the ELBO are estimated
without bias by sampling the reverse conditional over the mixing noise with
stationary-start HMC; a finite-sample surrogate lower bound is included as
the comparison baseline, along with target models, an RMSProp-style
optimizer, and evaluation tooling verified against closed-form conjugate
oracles.
"""

from .conditionals import (
    ExpFamCond,
    GaussianCond,
    expfam_grad_logdensity_z,
    grad_logdensity_z,
    log_density,
    reparameterize,
    sample_noise,
)
from .errors import (
    ConfigError,
    DataError,
    NonFiniteError,
    QuadratureError,
    SemiviError,
    ShapeError,
)
from .evaluation import elbo_estimate, exact_elbo_quadrature, is_log_marginal
from .experiments import MetricsRecord, RunConfig, run_experiment, sweep_hmc_iterations
from .family import (
    DrawRecord,
    SemiImplicitQ,
    cond_params,
    load_checkpoint,
    make_constant_family,
    make_family,
    marginal_logdensity_estimate,
    sample,
    save_checkpoint,
)
from .gradients import (
    FamilyGrads,
    GradEstimate,
    elbo_gradient,
    entropy_term,
    grad_z_log_marginal_oracle,
    model_term,
)
from .hmc import ChainState, HmcConfig, hmc_sample, leapfrog, reverse_log_target
from .nn import MlpParams, finite_difference_check, mlp_forward, mlp_init, mlp_vjp
from .optim import RmsPropState, rmsprop_init, rmsprop_step
from .sivi import SiviConfig, l_schedule_linear, sivi_surrogate_gradient
from .targets import (
    Banana,
    GaussianTarget,
    Multimodal,
    MultinomialLogisticRegression,
    TargetModel,
    XShaped,
    banana_log_density,
    mlr_predictive_loglik,
    multimodal_log_density,
    xshaped_log_density,
)

__version__ = "0.1.0"
