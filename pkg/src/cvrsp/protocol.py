"""The remote state preparation chain and its closed-form optimum.

The chain acts on two paths, mode 0 (Alice, later the feedforward/C' output)
and mode 1 (Bob):

    thermal(n1, n2) -> squeezers -> loss eps -> hybrid ring
        -> losses (eta1, eta2) -> noisy PSA on mode 0 -> coupler -> rotation on mode 1
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import components as comp
from ._kernels import chain_covariances as _kernel_chain
from .exceptions import StructuralError
from .gaussian import GaussianState, apply_channel, direct_sum, embed

DEGENERATE_B2 = 1e-12


class MultiModalityWarning(RuntimeWarning):
    """Purity has several local maxima in the searched gain interval."""


@dataclass(frozen=True)
class CrosstalkSpec:
    """Linear pull of the first squeezer angle by the PSA pump.

    ``kappa`` is in radians per unit gain; ``gain_units`` selects whether
    that gain is linear or in dB.
    """

    gamma1_0: float = 0.0
    kappa: float = 0.0
    lam: float = 0.0
    gain_units: str = "linear"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.gamma1_0, self.kappa, self.lam)):
            raise StructuralError("crosstalk parameters must be finite")
        if self.gain_units not in ("linear", "db"):
            raise StructuralError(f"gain_units must be 'linear' or 'db', got {self.gain_units!r}")


@dataclass(frozen=True)
class RspParams:
    """Complete model parameter set.

    ``squeezer1.gamma`` is not used by the chain: the first squeezer angle is
    always ``effective_gamma1(params)``, built from ``crosstalk.gamma1_0``.
    """

    squeezer1: comp.SqueezerSpec = field(default_factory=comp.SqueezerSpec)
    squeezer2: comp.SqueezerSpec = field(default_factory=comp.SqueezerSpec)
    loss_pre: comp.LossSpec = field(default_factory=comp.LossSpec)
    loss_alice: comp.LossSpec = field(default_factory=comp.LossSpec)
    loss_bob: comp.LossSpec = field(default_factory=comp.LossSpec)
    psa: comp.PsaSpec = field(default_factory=comp.PsaSpec)
    coupler: comp.CouplerSpec = field(default_factory=lambda: comp.CouplerSpec(-math.inf))
    theta_rp: float = 0.0
    crosstalk: CrosstalkSpec = field(default_factory=CrosstalkSpec)
    symmetric_tms: bool = False

    def __post_init__(self):
        if self.symmetric_tms and (
            self.squeezer1.r != self.squeezer2.r or self.squeezer1.n != self.squeezer2.n
        ):
            raise StructuralError("symmetric_tms requires equal r and n on both squeezers")

    def with_feedforward(self, gain_linear=None, gamma_f=None) -> "RspParams":
        psa = self.psa
        if gain_linear is not None:
            psa = replace(psa, gain_linear=float(gain_linear))
        if gamma_f is not None:
            psa = replace(psa, gamma_f=float(gamma_f))
        return replace(self, psa=psa)


def reference_params(gain_linear=None, gamma_f=0.0) -> RspParams:
    """Reference model parameters; gain defaults to ``tau/(1-tau)``."""
    d = math.radians
    coupler = comp.CouplerSpec(-14.6)
    if gain_linear is None:
        gain_linear = coupler.tau / (1.0 - coupler.tau)
    return RspParams(
        squeezer1=comp.SqueezerSpec(1.20, d(49.6), 0.04),
        squeezer2=comp.SqueezerSpec(1.20, d(135.0), 0.04),
        loss_pre=comp.LossSpec.from_db(0.72),
        loss_alice=comp.LossSpec.from_db(0.35),
        loss_bob=comp.LossSpec.from_db(0.30),
        psa=comp.PsaSpec(gain_linear, gamma_f, d(136.5), 0.0059),
        coupler=coupler,
        theta_rp=d(68.5),
        crosstalk=CrosstalkSpec(d(49.6), d(-0.17), 0.02, "linear"),
        symmetric_tms=True,
    )


def effective_gamma1(params: RspParams) -> float:
    ct = params.crosstalk
    gain = params.psa.gain_linear
    if ct.gain_units == "db":
        gain = comp.db_from_gain(gain)
    return ct.gamma1_0 + ct.kappa * gain + ct.lam * params.psa.gamma_f


def _input_state(params: RspParams) -> GaussianState:
    return GaussianState.thermal([params.squeezer1.n, params.squeezer2.n], mode_count=2)


def _resource_channels(params: RspParams):
    s1 = replace(params.squeezer1, gamma=effective_gamma1(params))
    yield direct_sum(comp.squeezer_channel(s1), comp.squeezer_channel(params.squeezer2))
    yield comp.two_mode_loss_channel(params.loss_pre, params.loss_pre)
    yield comp.hybrid_ring_channel()
    yield comp.two_mode_loss_channel(params.loss_alice, params.loss_bob)
    yield embed(comp.psa_channel(params.psa), 0, 2)


def feedforward_input_state(params: RspParams) -> GaussianState:
    """Joint state of Alice's amplified path and Bob's path before the coupler."""
    state = _input_state(params)
    for ch in _resource_channels(params):
        state = apply_channel(state, ch)
    return state


def run_rsp(params: RspParams):
    """Propagate the full chain.

    Returns ``(prepared, feedforward_out, joint)`` where ``joint`` is the
    two-mode state after coupler and rotation, ``prepared`` is Bob's mode
    and ``feedforward_out`` is the second coupler output.
    """
    state = feedforward_input_state(params)
    state = apply_channel(state, comp.coupler_channel(params.coupler))
    joint = apply_channel(state, embed(comp.rotation_channel(params.theta_rp), 1, 2))
    return joint.reduced(1), joint.reduced(0), joint


# -- fast path ----------------------------------------------------------------


def pack_params(params: RspParams) -> np.ndarray:
    """Flatten the gain-independent parameters for the chain kernel."""
    ct = params.crosstalk
    return np.array(
        [
            params.squeezer1.r,
            params.squeezer2.r,
            params.squeezer1.n,
            params.squeezer2.n,
            ct.gamma1_0,
            ct.kappa,
            ct.lam,
            1.0 if ct.gain_units == "db" else 0.0,
            params.squeezer2.gamma,
            params.loss_pre.loss_linear,
            params.loss_alice.loss_linear,
            params.loss_bob.loss_linear,
            params.psa.noise_slope,
            params.psa.theta_f,
            params.coupler.tau,
            params.theta_rp,
        ],
        dtype=float,
    )


def chain_covariances(params: RspParams, gains, gamma_fs) -> np.ndarray:
    """Joint 4x4 covariances after the full chain for many feedforward settings.

    ``gains`` (linear) and ``gamma_fs`` (radians) broadcast against each
    other; the result has shape ``broadcast_shape + (4, 4)``.
    """
    g, a = np.broadcast_arrays(np.asarray(gains, dtype=float), np.asarray(gamma_fs, dtype=float))
    if np.any(g < 1.0):
        raise StructuralError("PSA gains must be >= 1")
    out = _kernel_chain(pack_params(params), np.ascontiguousarray(g.ravel()), np.ascontiguousarray(a.ravel()))
    return out.reshape(g.shape + (4, 4))


# -- prepared state summary ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class PreparedStateSummary:
    s_rp_db: float
    a_rp_db: float
    gamma_rp: float
    mu: float
    cov: np.ndarray
    degenerate: bool = False

    @property
    def sigma_s2(self) -> float:
        return 0.25 * 10.0 ** (-self.s_rp_db / 10.0)

    @property
    def sigma_a2(self) -> float:
        return 0.25 * 10.0 ** (self.a_rp_db / 10.0)

    @property
    def gamma_rp_deg(self) -> float:
        return math.degrees(self.gamma_rp)


def summarize_covariances(covs):
    """Vectorised summary of single-mode covariances ``(..., 2, 2)``.

    Returns a dict of arrays ``s_db, a_db, gamma, mu, degenerate``.
    """
    covs = np.asarray(covs, dtype=float)
    vqq, vpp, vqp = covs[..., 0, 0], covs[..., 1, 1], covs[..., 0, 1]
    b2 = (vqq - vpp) + 2j * vqp
    nbar = vqq + vpp - 0.5
    degenerate = np.abs(b2) < DEGENERATE_B2
    gamma = np.where(degenerate, 0.0, np.mod(-0.5 * np.angle(-b2), np.pi))
    rot = b2 * np.exp(2j * gamma)
    sigma_s = 0.25 * (2.0 * rot.real + 2.0 * nbar + 1.0)
    sigma_a = 0.25 * (-2.0 * rot.real + 2.0 * nbar + 1.0)
    det = vqq * vpp - vqp * vqp
    return {
        "s_db": -10.0 * np.log10(sigma_s / 0.25),
        "a_db": 10.0 * np.log10(sigma_a / 0.25),
        "gamma": gamma,
        "mu": 1.0 / (4.0 * np.sqrt(det)),
        "degenerate": degenerate,
    }


def summarize_prepared(state: GaussianState) -> PreparedStateSummary:
    """Squeezing, antisqueezing, angle and purity of a single-mode state.

    Rotationally symmetric states (``|<b^2>| < 1e-12``) get ``gamma_rp = 0``
    and ``degenerate = True``.
    """
    if state.mode_count != 1:
        raise StructuralError("summarize_prepared expects a single-mode state")
    s = summarize_covariances(state.cov)
    gamma = float(s["gamma"])
    if gamma >= math.pi:
        gamma -= math.pi
    return PreparedStateSummary(
        s_rp_db=float(s["s_db"]),
        a_rp_db=float(s["a_db"]),
        gamma_rp=gamma,
        mu=float(s["mu"]),
        cov=state.cov,
        degenerate=bool(s["degenerate"]),
    )


# -- closed forms ---------------------------------------------------------------


def optimal_point_prediction(r, n, eta, tau, n_f, gamma1=0.0):
    """Closed-form ``(sigma_s2, sigma_a2, gamma_rp)`` at ``G_f = tau/(1-tau)``.

    Valid for equal squeezers and post-splitter losses, no pre-splitter loss,
    no crosstalk, ``gamma_2 = theta_f = pi/2 + gamma1`` and ``gamma_f = 0``.
    """
    if r < 0 or n < 0 or not 0 <= eta < 1 or not 0 < tau < 1 or n_f < 0:
        raise StructuralError("parameters outside the closed-form domain")
    th = 1.0 + 2.0 * n
    sigma_s2 = 0.25 * (2.0 * th * math.exp(-2.0 * r) * (1.0 - eta) * tau + 2.0 * (eta + n_f) * tau)
    inner = (
        (2.0 * tau * n_f + 1.0) ** 2 / (2.0 * math.exp(-2.0 * r))
        + (2.0 * tau * n_f + 2.0 * tau - 1.0) ** 2 / (2.0 * math.exp(2.0 * r))
    )
    inner += (
        4.0 * eta * tau**2 * n_f**2
        + 2.0 * n_f * ((1.0 - tau) ** 2 + 2.0 * eta * tau**2)
        + eta * (2.0 * tau**2 - 2.0 * tau + 1.0)
    ) / ((1.0 - eta) * th)
    sigma_a2 = (1.0 - eta) * th / (4.0 * tau * (1.0 + 2.0 * n_f) ** 2) * inner
    return sigma_s2, sigma_a2, gamma1


def closed_form_params(r, n, eta, tau, n_f, gamma1=0.0) -> RspParams:
    """Chain parameters under which the closed form applies, at ``G_f = tau/(1-tau)``.

    ``n_f`` is the PSA noise photon number at that gain.
    """
    gain = tau / (1.0 - tau)
    half = math.pi / 2.0
    return RspParams(
        squeezer1=comp.SqueezerSpec(r, gamma1, n),
        squeezer2=comp.SqueezerSpec(r, gamma1 + half, n),
        loss_alice=comp.LossSpec(eta),
        loss_bob=comp.LossSpec(eta),
        psa=comp.PsaSpec(gain, 0.0, gamma1 + half, n_f / gain),
        coupler=comp.CouplerSpec.from_tau(tau),
        crosstalk=CrosstalkSpec(gamma1, 0.0, 0.0),
        symmetric_tms=True,
    )


def prepared_purity(params: RspParams, gains) -> np.ndarray:
    covs = chain_covariances(params, gains, params.psa.gamma_f)
    return summarize_covariances(covs[..., 2:, 2:])["mu"]


def find_optimal_gain(params: RspParams, search_range=(0.0, 20.0), scan_points=401, xatol=1e-6) -> float:
    """Linear PSA gain maximising the purity of the prepared state.

    ``search_range`` is in dB.  A coarse scan checks for a single interior
    maximum; Brent's bounded search then refines it to ``xatol`` in linear
    gain.  With several maxima the best scanned gain is returned and a
    :class:`MultiModalityWarning` is issued.
    """
    lo_db, hi_db = search_range
    if hi_db <= lo_db or lo_db < 0:
        raise StructuralError(f"invalid gain search range {search_range}")
    lo, hi = comp.gain_from_db(lo_db), comp.gain_from_db(hi_db)
    grid = np.linspace(lo, hi, scan_points)
    mu = prepared_purity(params, grid)
    inner = mu[1:-1]
    peaks = np.flatnonzero((inner > mu[:-2]) & (inner >= mu[2:])) + 1
    best = int(np.argmax(mu))
    if len(peaks) > 1:
        warnings.warn(
            f"purity has {len(peaks)} local maxima in [{lo_db}, {hi_db}] dB",
            MultiModalityWarning,
            stacklevel=2,
        )
        return float(grid[best])
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda g: -float(prepared_purity(params, g)),
        bounds=(a, b),
        method="bounded",
        options={"xatol": xatol},
    )
    return float(res.x) if -res.fun >= mu[best] else float(grid[best])
