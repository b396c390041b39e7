"""Channel constructors for the elements of the preparation chain.

Squeezer sign convention: the Bogoliubov map
``a -> a cosh r - a^dag exp(-2i gamma) sinh r`` becomes, on ``(q, p)``,

    [[cosh r - sinh r cos 2g,  sinh r sin 2g],
     [sinh r sin 2g,           cosh r + sinh r cos 2g]]

so ``gamma = 0`` squeezes ``q`` and antisqueezes ``p``; ``gamma`` is the angle
between the antisqueezed quadrature and the p-axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import StructuralError
from .gaussian import LinearChannel, direct_sum


def loss_from_db(chi_db: float) -> float:
    """Fraction of power lost for an attenuation of ``chi_db`` dB."""
    return 1.0 - 10.0 ** (-chi_db / 10.0)


def db_from_loss(loss: float) -> float:
    return -10.0 * math.log10(1.0 - loss)


def gain_from_db(gain_db: float) -> float:
    return 10.0 ** (gain_db / 10.0)


def db_from_gain(gain: float) -> float:
    return 10.0 * math.log10(gain)


def tau_from_beta(beta_db: float) -> float:
    return 1.0 - 10.0 ** (beta_db / 10.0)


def beta_from_tau(tau: float) -> float:
    if tau >= 1.0:
        return -math.inf
    return 10.0 * math.log10(1.0 - tau)


def squeeze_matrix(r: float, gamma: float) -> np.ndarray:
    c, s = math.cosh(r), math.sinh(r)
    c2, s2 = math.cos(2.0 * gamma), math.sin(2.0 * gamma)
    return np.array([[c - s * c2, s * s2], [s * s2, c + s * c2]])


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class SqueezerSpec:
    r: float = 0.0
    gamma: float = 0.0
    n: float = 0.0

    def __post_init__(self):
        if not self.r >= 0:
            raise StructuralError(f"squeezing factor must be >= 0, got {self.r}")
        if not self.n >= 0:
            raise StructuralError(f"input noise photons must be >= 0, got {self.n}")

    @property
    def squeezing_db(self) -> float:
        """Output squeezing level for the thermal input ``n``."""
        return -10.0 * math.log10((1.0 + 2.0 * self.n) * math.exp(-2.0 * self.r))


@dataclass(frozen=True)
class PsaSpec:
    """Noisy phase-sensitive amplifier.

    ``gain_linear`` is the power gain ``G_f = exp(2 r_f)``; the added input
    noise has ``n_f = noise_slope * gain_linear`` photons.
    """

    gain_linear: float = 1.0
    gamma_f: float = 0.0
    theta_f: float = 0.0
    noise_slope: float = 0.0

    def __post_init__(self):
        if not self.gain_linear >= 1.0:
            raise StructuralError(f"PSA gain must be >= 1, got {self.gain_linear}")
        if not self.noise_slope >= 0:
            raise StructuralError(f"PSA noise slope must be >= 0, got {self.noise_slope}")

    @classmethod
    def from_db(cls, gain_db, gamma_f=0.0, theta_f=0.0, noise_slope=0.0):
        return cls(gain_from_db(gain_db), gamma_f, theta_f, noise_slope)

    @property
    def r_f(self) -> float:
        return 0.5 * math.log(self.gain_linear)

    @property
    def noise_photons(self) -> float:
        return self.noise_slope * self.gain_linear

    @property
    def injected_noise_variance(self) -> float:
        """Variance added to each quadrature before amplification."""
        return 0.5 * self.noise_photons


@dataclass(frozen=True)
class LossSpec:
    loss_linear: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.loss_linear < 1.0:
            raise StructuralError(f"loss must lie in [0, 1), got {self.loss_linear}")

    @classmethod
    def from_db(cls, chi_db: float) -> "LossSpec":
        if chi_db < 0:
            raise StructuralError(f"loss in dB must be >= 0, got {chi_db}")
        return cls(loss_from_db(chi_db))

    @property
    def db(self) -> float:
        return db_from_loss(self.loss_linear)


@dataclass(frozen=True)
class CouplerSpec:
    """Directional coupler with coupling ``beta_db`` (``-inf`` means no coupling)."""

    beta_db: float = -15.0

    def __post_init__(self):
        if not self.beta_db < 0:
            raise StructuralError(f"coupling must be < 0 dB, got {self.beta_db}")

    @classmethod
    def from_tau(cls, tau: float) -> "CouplerSpec":
        if not 0.0 < tau <= 1.0:
            raise StructuralError(f"transmissivity must lie in (0, 1], got {tau}")
        return cls(beta_from_tau(tau))

    @property
    def tau(self) -> float:
        return tau_from_beta(self.beta_db)


def squeezer_channel(spec: SqueezerSpec) -> LinearChannel:
    """Noiseless squeezer; input noise ``spec.n`` belongs to the input state."""
    return LinearChannel(squeeze_matrix(spec.r, spec.gamma))


def psa_channel(spec: PsaSpec) -> LinearChannel:
    """Input noise of ``n_f/2`` per quadrature followed by ideal amplification.

    The amplified quadrature sits at angle ``gamma_f + theta_f`` from the
    p-axis and sees amplitude gain ``sqrt(G_f)``; the orthogonal one
    ``1/sqrt(G_f)``.
    """
    t = squeeze_matrix(spec.r_f, spec.gamma_f + spec.theta_f)
    noise = spec.injected_noise_variance * (t @ t.T)
    return LinearChannel(t, 0.5 * (noise + noise.T))


def loss_channel(spec: LossSpec) -> LinearChannel:
    eps = spec.loss_linear
    return LinearChannel(math.sqrt(1.0 - eps) * np.eye(2), (eps / 4.0) * np.eye(2))


def two_mode_loss_channel(first: LossSpec, second: LossSpec) -> LinearChannel:
    return direct_sum(loss_channel(first), loss_channel(second))


def beam_splitter_matrix(tau: float) -> np.ndarray:
    """``a1 -> sqrt(tau) a1 + sqrt(1-tau) a2``, ``a2 -> -sqrt(1-tau) a1 + sqrt(tau) a2``."""
    t, s = math.sqrt(tau), math.sqrt(1.0 - tau)
    eye = np.eye(2)
    return np.block([[t * eye, s * eye], [-s * eye, t * eye]])


def hybrid_ring_channel() -> LinearChannel:
    """50:50 beam splitter ``((a1 + a2)/sqrt 2, (-a1 + a2)/sqrt 2)``."""
    return LinearChannel(beam_splitter_matrix(0.5))


def coupler_channel(spec: CouplerSpec) -> LinearChannel:
    """Asymmetric beam splitter; mode 0 is the feedforward, mode 1 is Bob."""
    return LinearChannel(beam_splitter_matrix(spec.tau))


def rotation_channel(theta_rp: float) -> LinearChannel:
    """Phase rotation ``a -> a exp(-i theta_rp)`` of a single mode."""
    return LinearChannel(rotation_matrix(theta_rp))
