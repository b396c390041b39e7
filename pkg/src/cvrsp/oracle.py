"""Monte Carlo check of the chain covariance.

Samples are complex amplitudes ``a = q + i p`` drawn from the Wigner
distributions of the inputs and pushed through the operator-level maps

    squeezer   a -> a cosh r - conj(a) exp(-2i gamma) sinh r
    loss       a -> sqrt(1 - eps) a + sqrt(eps) v,   v vacuum
    splitter   (a1, a2) -> (sqrt(t) a1 + sqrt(1-t) a2, -sqrt(1-t) a1 + sqrt(t) a2)
    PSA        a -> squeeze(a + zeta),   <Re zeta^2> = <Im zeta^2> = n_f / 2
    rotation   a -> a exp(-i theta)

None of the matrix machinery of the analytic path is reused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import StructuralError
from .protocol import RspParams, effective_gamma1, run_rsp

Z_THRESHOLD = 5.0
MIN_SAMPLES = 10_000
CHUNK = 1 << 17

# Each mutation corrupts one map of the sampled chain by a sign flip.
MUTATIONS = ("squeezer-sign", "coupler-sign", "rotation-sign")


@dataclass(frozen=True, eq=False)
class OracleReport:
    analytic: np.ndarray
    sampled: np.ndarray
    z_scores: np.ndarray
    samples: int
    seed: int
    mutation: str | None = None

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= Z_THRESHOLD


def _gauss(rng, var, size):
    sd = math.sqrt(var)
    return sd * rng.standard_normal(size) + 1j * sd * rng.standard_normal(size)


def _squeeze(a, r, gamma, sign=1.0):
    return a * math.cosh(r) - sign * np.conj(a) * np.exp(-2j * gamma) * math.sinh(r)


def _lossy(rng, a, eps):
    return math.sqrt(1.0 - eps) * a + math.sqrt(eps) * _gauss(rng, 0.25, a.shape)


def _split(a1, a2, tau, sign=1.0):
    t, s = math.sqrt(tau), math.sqrt(1.0 - tau)
    return t * a1 + s * a2, -sign * s * a1 + t * a2


def sample_chain(params: RspParams, rng, size: int, mutation: str | None = None):
    """Output amplitudes ``(feedforward, prepared)`` for ``size`` samples."""
    a1 = _gauss(rng, 0.25 * (1.0 + 2.0 * params.squeezer1.n), size)
    a2 = _gauss(rng, 0.25 * (1.0 + 2.0 * params.squeezer2.n), size)
    a1 = _squeeze(a1, params.squeezer1.r, effective_gamma1(params), -1.0 if mutation == "squeezer-sign" else 1.0)
    a2 = _squeeze(a2, params.squeezer2.r, params.squeezer2.gamma)
    eps = params.loss_pre.loss_linear
    a1, a2 = _lossy(rng, a1, eps), _lossy(rng, a2, eps)
    a1, a2 = _split(a1, a2, 0.5)
    a1 = _lossy(rng, a1, params.loss_alice.loss_linear)
    a2 = _lossy(rng, a2, params.loss_bob.loss_linear)
    psa = params.psa
    zeta = _gauss(rng, 0.5 * psa.noise_photons, size)
    a1 = _squeeze(a1 + zeta, 0.5 * math.log(psa.gain_linear), psa.gamma_f + psa.theta_f)
    a1, a2 = _split(a1, a2, params.coupler.tau, -1.0 if mutation == "coupler-sign" else 1.0)
    theta = -params.theta_rp if mutation == "rotation-sign" else params.theta_rp
    a2 = a2 * np.exp(-1j * theta)
    return a1, a2


def run_oracle(params: RspParams, samples: int = 1_000_000, seed: int = 0, mutation: str | None = None) -> OracleReport:
    """Compare the sampled joint covariance with the analytic one.

    The generator is numpy's PCG64 seeded with ``seed``; samples are drawn
    in fixed-size chunks so results do not depend on available memory.
    """
    if samples < MIN_SAMPLES:
        raise StructuralError(f"oracle needs at least {MIN_SAMPLES} samples, got {samples}")
    if not 0 <= int(seed) < 2**64:
        raise StructuralError("seed must be an unsigned 64-bit integer")
    if mutation is not None and mutation not in MUTATIONS:
        raise StructuralError(f"unknown mutation {mutation!r}; choose from {MUTATIONS}")
    rng = np.random.default_rng(int(seed))
    total = np.zeros(4)
    outer = np.zeros((4, 4))
    done = 0
    while done < samples:
        size = min(CHUNK, samples - done)
        f, b = sample_chain(params, rng, size, mutation)
        x = np.stack([f.real, f.imag, b.real, b.imag])
        total += x.sum(axis=1)
        outer += x @ x.T
        done += size
    mean = total / samples
    sampled = (outer - samples * np.outer(mean, mean)) / (samples - 1)
    analytic = run_rsp(params)[2].cov
    d = np.diag(analytic)
    se = np.sqrt((np.outer(d, d) + analytic**2) / samples)
    z = (sampled - analytic) / se
    return OracleReport(np.array(analytic), sampled, z, int(samples), int(seed), mutation)
