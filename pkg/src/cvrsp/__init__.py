"""Continuous-variable remote state preparation: Gaussian chain model,
security metrics, moment tomography and model fitting."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .components import (
    CouplerSpec,
    LossSpec,
    PsaSpec,
    SqueezerSpec,
    coupler_channel,
    hybrid_ring_channel,
    loss_channel,
    psa_channel,
    rotation_channel,
    squeezer_channel,
)
from .gaussian import (
    GaussianState,
    LinearChannel,
    MomentSet,
    apply_channel,
    compose,
    moments_from_state,
    state_from_moments,
    symplectic_eigenvalues,
)
from .protocol import (
    CrosstalkSpec,
    PreparedStateSummary,
    RspParams,
    effective_gamma1,
    find_optimal_gain,
    optimal_point_prediction,
    run_rsp,
    summarize_prepared,
    reference_params,
)
