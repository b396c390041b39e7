"""Moment and cumulant bookkeeping for Gaussianity checks and reconstruction.

Cumulants are the mixed partial derivatives at zero of the logarithm of the
exponential moment series ``sum <(a^dag)^n a^m> x^n y^m / (n! m!)``.  Rather
than differentiating symbolically we use the exact recursion that follows
from ``dM = M dK``: for a multi-index ``alpha`` with first non-zero slot ``i``

    mu(alpha) = sum_{beta <= alpha, beta_i >= 1}
                  prod_j C(alpha_j - [j=i], beta_j - [j=i]) kappa(beta) mu(alpha - beta)

Raw quadrature moments are treated as symmetrically ordered (Wigner)
moments of ``I = q`` and ``Q = p`` in the vacuum-variance-1/4 convention.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial
from typing import NamedTuple

import numpy as np

from .exceptions import StructuralError
from .gaussian import MAX_ORDER, MomentSet, moment_keys


@dataclass(frozen=True)
class CumulantSet:
    mode_count: int
    cumulants: dict

    def __getitem__(self, key):
        return self.cumulants[tuple(key)]

    def max_abs(self, orders=(3, 4)) -> float:
        vals = [abs(v) for k, v in self.cumulants.items() if sum(k) in orders]
        return max(vals, default=0.0)


def _sub_indices(alpha):
    return itertools.product(*(range(a + 1) for a in alpha))


def _recursion_coeff(alpha, beta, i):
    c = 1
    for j, (a, b) in enumerate(zip(alpha, beta)):
        if j == i:
            c *= comb(a - 1, b - 1)
        else:
            c *= comb(a, b)
    return c


def _keys_by_order(table, mode_count):
    keys = moment_keys(mode_count)
    missing = [k for k in keys if k not in table]
    if missing:
        raise StructuralError(f"missing entries for keys {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return keys


def cumulants_from_moments(ms: MomentSet) -> CumulantSet:
    moments = ms.moments
    keys = _keys_by_order(moments, ms.mode_count)
    kappa = {}
    for alpha in keys:
        if sum(alpha) == 0:
            kappa[alpha] = 0j
            continue
        i = next(j for j, a in enumerate(alpha) if a)
        acc = moments[alpha]
        for beta in _sub_indices(alpha):
            if beta == alpha or beta[i] == 0:
                continue
            rest = tuple(a - b for a, b in zip(alpha, beta))
            acc -= _recursion_coeff(alpha, beta, i) * kappa[beta] * moments[rest]
        kappa[alpha] = complex(acc)
    return CumulantSet(ms.mode_count, kappa)


def moments_from_cumulants(cs: CumulantSet) -> MomentSet:
    keys = _keys_by_order(cs.cumulants, cs.mode_count)
    mu = {}
    for alpha in keys:
        if sum(alpha) == 0:
            mu[alpha] = 1.0 + 0j
            continue
        i = next(j for j, a in enumerate(alpha) if a)
        acc = 0j
        for beta in _sub_indices(alpha):
            if beta[i] == 0:
                continue
            rest = tuple(a - b for a, b in zip(alpha, beta))
            acc += _recursion_coeff(alpha, beta, i) * cs.cumulants[beta] * mu[rest]
        mu[alpha] = acc
    return MomentSet(cs.mode_count, _hermitize(mu))


def _hermitize(table):
    from .gaussian import conjugate_key

    out = dict(table)
    for k in list(out):
        ck = conjugate_key(k)
        if ck == k:
            out[k] = complex(out[k].real, 0.0)
        elif ck > k:
            out[ck] = np.conj(out[k])
    return out


class GaussianityResult(NamedTuple):
    gaussian: bool
    max_violation: float


def gaussianity_check(ms: MomentSet, tol: float = 1e-10) -> GaussianityResult:
    """Gaussian iff every third- and fourth-order cumulant is at most ``tol``."""
    worst = cumulants_from_moments(ms).max_abs((3, 4))
    return GaussianityResult(bool(worst <= tol), float(worst))


# -- quadrature <-> signal moments ----------------------------------------------
#
# Raw keys follow the detector layout <I1^n I2^m Q1^k Q2^l> -> (n, m, k, l);
# single mode <I^n Q^k> -> (n, k).


def raw_keys(mode_count: int, max_order: int = MAX_ORDER):
    width = 2 * mode_count
    keys = [k for k in itertools.product(range(max_order + 1), repeat=width) if sum(k) <= max_order]
    return sorted(keys, key=lambda k: (sum(k), k))


def _raw_exponents(key, mode_count):
    """Per-mode ``(I power, Q power)`` pairs from a raw key."""
    if mode_count == 1:
        return [(key[0], key[1])]
    n, m, k, l = key
    return [(n, k), (m, l)]


def _raw_key(per_mode):
    if len(per_mode) == 1:
        return tuple(per_mode[0])
    (n, k), (m, l) = per_mode
    return (n, m, k, l)


def _ladder_expansion(n, m):
    """``conj(alpha)^n alpha^m`` with ``alpha = I + iQ`` as {(I power, Q power): coeff}."""
    out = {}
    for j in range(n + 1):
        for k in range(m + 1):
            coeff = comb(n, j) * comb(m, k) * (-1j) ** j * (1j) ** k
            key = (n - j + m - k, j + k)
            out[key] = out.get(key, 0) + coeff
    return out


def _quadrature_expansion(a, c):
    """``I^a Q^c`` as {(conj power, alpha power): coeff}."""
    out = {}
    norm = 1.0 / (2**a * (2j) ** c)
    for u in range(a + 1):
        for v in range(c + 1):
            coeff = comb(a, u) * comb(c, v) * (-1) ** (c - v) * norm
            key = (a - u + c - v, u + v)
            out[key] = out.get(key, 0) + coeff
    return out


def _ordering_shift(table, mode_count, sign):
    """Symmetric -> normal ordering (``sign = -1``) or back (``sign = +1``)."""
    out = {}
    for key in moment_keys(mode_count):
        per_mode = [(key[2 * i], key[2 * i + 1]) for i in range(mode_count)]
        total = 0j
        for ks in itertools.product(*(range(min(n, m) + 1) for n, m in per_mode)):
            w = 1.0
            sub = []
            for (n, m), k in zip(per_mode, ks):
                w *= (sign * 0.5) ** k * factorial(k) * comb(n, k) * comb(m, k)
                sub += [n - k, m - k]
            total += w * table[tuple(sub)]
        out[key] = total
    return out


def quadrature_to_signal_moments(raw: dict, mode_count: int) -> MomentSet:
    """Normally ordered signal moments from raw ``I``/``Q`` correlation moments."""
    if mode_count not in (1, 2):
        raise StructuralError(f"mode_count must be 1 or 2, got {mode_count}")
    raw = {tuple(int(i) for i in k): v for k, v in raw.items()}
    zero = (0,) * (2 * mode_count)
    raw.setdefault(zero, 1.0)
    missing = [k for k in raw_keys(mode_count) if k not in raw]
    if missing:
        raise StructuralError(f"incomplete raw moment set, missing {missing[:5]}")
    for k, v in raw.items():
        if abs(np.imag(v)) > 1e-12:
            raise StructuralError(f"raw quadrature moment {k} is not real")
    weyl = {}
    for key in moment_keys(mode_count):
        per_mode = [(key[2 * i], key[2 * i + 1]) for i in range(mode_count)]
        expansions = [_ladder_expansion(n, m) for n, m in per_mode]
        total = 0j
        for terms in itertools.product(*(e.items() for e in expansions)):
            coeff = np.prod([c for _, c in terms])
            total += coeff * np.real(raw[_raw_key([p for p, _ in terms])])
        weyl[key] = total
    normal = _ordering_shift(weyl, mode_count, -1)
    return MomentSet(mode_count, _hermitize(normal))


def signal_to_quadrature_moments(ms: MomentSet) -> dict:
    """Inverse of :func:`quadrature_to_signal_moments`."""
    m = ms.mode_count
    _keys_by_order(ms.moments, m)
    weyl = _ordering_shift(ms.moments, m, +1)
    raw = {}
    for rkey in raw_keys(m):
        per_mode = _raw_exponents(rkey, m)
        expansions = [_quadrature_expansion(a, c) for a, c in per_mode]
        total = 0j
        for terms in itertools.product(*(e.items() for e in expansions)):
            coeff = np.prod([c for _, c in terms])
            key = tuple(x for p, _ in terms for x in p)
            total += coeff * weyl[key]
        raw[rkey] = float(total.real)
    return raw
