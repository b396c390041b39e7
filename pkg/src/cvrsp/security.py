"""Entropies, one-time-pad audit, entanglement witness and Wigner contours.

Entropies are in nats unless another logarithm base is requested.  Mode
roles in two-mode states follow the chain: mode 0 is the feedforward /
second coupler output ``C'``, mode 1 is the prepared state ``M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import PhysicalityError, StructuralError
from .gaussian import PHYSICALITY_TOL, VACUUM_VARIANCE, GaussianState

LOG_BASES = {"e": math.e, "2": 2.0, "10": 10.0}


def _log_scale(base) -> float:
    if base in (None, "e", math.e):
        return 1.0
    b = LOG_BASES.get(str(base), base)
    return 1.0 / math.log(float(b))


def entropy_function(x: float) -> float:
    """``f(x) = (2x + 1/2) ln(2x + 1/2) - (2x - 1/2) ln(2x - 1/2)``, with f(1/4) = 0."""
    if x < VACUUM_VARIANCE - PHYSICALITY_TOL:
        raise PhysicalityError(f"symplectic eigenvalue {x:.6g} below 1/4")
    plus = 2.0 * x + 0.5
    minus = 2.0 * x - 0.5
    out = plus * math.log(plus)
    if minus > 0:
        out -= minus * math.log(minus)
    return max(out, 0.0)


def _two_mode_nu(cov: np.ndarray, transpose: bool = False):
    a, b, c = cov[:2, :2], cov[2:, 2:], cov[:2, 2:]
    sign = -1.0 if transpose else 1.0
    delta = np.linalg.det(a) + np.linalg.det(b) + sign * 2.0 * np.linalg.det(c)
    det_v = np.linalg.det(cov)
    disc = math.sqrt(max(delta * delta - 4.0 * det_v, 0.0))
    nu_plus = math.sqrt(max((delta + disc) / 2.0, 0.0))
    nu_minus = math.sqrt(max((delta - disc) / 2.0, 0.0))
    return nu_minus, nu_plus


def von_neumann_entropy(state: GaussianState, base="e") -> float:
    if state.mode_count == 1:
        nus = [math.sqrt(np.linalg.det(state.cov))]
    elif state.mode_count == 2:
        nus = _two_mode_nu(state.cov)
    else:
        raise StructuralError(f"entropy supports 1 or 2 modes, got {state.mode_count}")
    return sum(entropy_function(nu) for nu in nus) * _log_scale(base)


def conditional_entropy(joint: GaussianState, condition_on: int, base="e") -> float:
    """``H(A|B) = H(A,B) - H(B)`` with ``B`` the mode ``condition_on``."""
    if joint.mode_count != 2:
        raise StructuralError("conditional entropy needs a two-mode state")
    return von_neumann_entropy(joint, base) - von_neumann_entropy(joint.reduced(condition_on), base)


@dataclass(frozen=True)
class EntropyReport:
    h_m: float
    h_c: float
    h_mc: float
    h_m_given_c: float
    delta: float


def otp_delta(joint: GaussianState, base="e") -> EntropyReport:
    """One-time-pad audit ``delta = H(M) - H(M|C')`` (mode 0 = C', mode 1 = M)."""
    if joint.mode_count != 2:
        raise StructuralError("otp_delta needs a two-mode state")
    h_m = von_neumann_entropy(joint.reduced(1), base)
    h_c = von_neumann_entropy(joint.reduced(0), base)
    h_mc = von_neumann_entropy(joint, base)
    h_m_given_c = h_mc - h_c
    return EntropyReport(h_m, h_c, h_mc, h_m_given_c, h_m - h_m_given_c)


@dataclass(frozen=True)
class NegativityResult:
    nu_tilde_minus: float
    n_k: float
    entangled: bool


def negativity_kernel(state: GaussianState) -> NegativityResult:
    """Smallest partially transposed symplectic eigenvalue and ``N_k = (1 - 4 nu)/(4 nu)``."""
    if state.mode_count != 2:
        raise StructuralError("negativity kernel needs a two-mode state")
    nu, _ = _two_mode_nu(state.cov, transpose=True)
    if nu <= 0:
        raise PhysicalityError("partially transposed spectrum is not positive")
    n_k = (1.0 - 4.0 * nu) / (4.0 * nu)
    return NegativityResult(nu, n_k, n_k > 0)


def squeezing_level_db(state: GaussianState) -> float:
    """``-10 log10(min variance / 0.25)``; positive below vacuum."""
    if state.mode_count != 1:
        raise StructuralError("squeezing level needs a single-mode state")
    return float(-10.0 * math.log10(np.linalg.eigvalsh(state.cov)[0] / VACUUM_VARIANCE))


@dataclass(frozen=True)
class FeedforwardReport:
    gain_db: float
    n_k: float
    local_squeezing_db: float
    classical: bool


def feedforward_classicality(joint_before_coupler: GaussianState, gain_db: float) -> FeedforwardReport:
    """Classify the amplified feedforward (mode 0) against Bob's path (mode 1).

    Classical means not entangled with Bob and not squeezed below vacuum.
    """
    neg = negativity_kernel(joint_before_coupler)
    sq = squeezing_level_db(joint_before_coupler.reduced(0))
    return FeedforwardReport(float(gain_db), neg.n_k, sq, bool(neg.n_k <= 0 and sq <= 0))


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    semi_axes: tuple
    tilt: float

    def points(self, count: int = 181) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * math.pi, count)
        a, b = self.semi_axes
        c, s = math.cos(self.tilt), math.sin(self.tilt)
        x = a * np.cos(t)
        y = b * np.sin(t)
        return np.column_stack([self.center[0] + c * x - s * y, self.center[1] + s * x + c * y])


def wigner_contour(state: GaussianState, level: float = math.exp(-1.0)) -> Ellipse:
    """Level set ``W = level * W_max`` of a single-mode Gaussian Wigner function.

    Semi-axes are ``sqrt(-2 ln(level) * sigma^2)`` along the principal
    quadratures; ``tilt`` is the angle of the first axis from the q-axis,
    in ``[0, pi)``.
    """
    if state.mode_count != 1:
        raise StructuralError("wigner_contour needs a single-mode state")
    if not 0.0 < level < 1.0:
        raise StructuralError(f"level must lie in (0, 1), got {level}")
    w, vecs = np.linalg.eigh(state.cov)
    scale = -2.0 * math.log(level)
    tilt = math.atan2(vecs[1, 0], vecs[0, 0]) % math.pi
    if tilt >= math.pi - 1e-15:
        tilt = 0.0
    return Ellipse(
        center=(float(state.mean[0]), float(state.mean[1])),
        semi_axes=(math.sqrt(scale * w[0]), math.sqrt(scale * w[1])),
        tilt=tilt,
    )


def feedforward_report(params, gain_db: float) -> FeedforwardReport:
    """:func:`feedforward_classicality` for ``params`` at PSA gain ``gain_db``."""
    from . import components as comp
    from .protocol import feedforward_input_state

    state = feedforward_input_state(params.with_feedforward(comp.gain_from_db(gain_db)))
    return feedforward_classicality(state, gain_db)


def classicality_thresholds(params, search_range=(0.0, 30.0), scan_points: int = 121):
    """Gains (dB) where ``N_k`` and the local squeezing of the feedforward change sign.

    Returns ``(entanglement_breaking_db, squeezing_crossover_db)``; an entry
    is ``None`` when no sign change occurs in ``search_range``.
    """
    from scipy.optimize import brentq

    gains = np.linspace(search_range[0], search_range[1], scan_points)
    reports = [feedforward_report(params, g) for g in gains]
    out = []
    for attr in ("n_k", "local_squeezing_db"):
        values = np.array([getattr(r, attr) for r in reports])
        flips = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
        if len(flips) == 0:
            out.append(None)
            continue
        i = flips[0]
        out.append(
            float(brentq(lambda g: getattr(feedforward_report(params, g), attr), gains[i], gains[i + 1], xtol=1e-9))
        )
    return tuple(out)
