"""Gaussian states, linear channels and normally ordered moments.

Conventions
-----------
Quadratures are ``q = (a + a^dag)/2`` and ``p = (a - a^dag)/(2i)`` so the
vacuum variance is 1/4 and ``a = q + i p``.  Vectors are ordered
``(q1, p1, q2, p2, ...)``.  The symplectic form is the block-diagonal
``[[0, 1], [-1, 0]]``; with this scaling the uncertainty principle reads
``V + i/4 * Omega >= 0``, equivalently every symplectic eigenvalue is at
least 1/4.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InternalConsistencyError, PhysicalityError, StructuralError

VACUUM_VARIANCE = 0.25
SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-9
PSD_TOL = 1e-12


def symplectic_form(mode_count: int) -> np.ndarray:
    return np.kron(np.eye(mode_count), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _symplectic_spectrum(cov: np.ndarray) -> np.ndarray:
    m = cov.shape[0] // 2
    sym = 0.5 * (cov + cov.T)
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        # not positive definite: fall back to the spectrum of i*Omega*V
        ev = np.abs(np.linalg.eigvals(1j * symplectic_form(m) @ sym))
        return np.sort(ev)[::2]
    ev = np.linalg.eigvalsh(1j * (chol.T @ symplectic_form(m) @ chol))
    return np.sort(ev[m:])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of ``mode_count`` bosonic modes."""

    mean: np.ndarray
    cov: np.ndarray
    mode_count: int = field(default=None)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        m = self.mode_count if self.mode_count is not None else mean.shape[0] // 2
        if m < 1 or mean.shape != (2 * m,) or cov.shape != (2 * m, 2 * m):
            raise StructuralError(
                f"inconsistent dimensions: mode_count={m}, mean {mean.shape}, cov {cov.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise StructuralError("mean and cov must be finite")
        asym = np.max(np.abs(cov - cov.T))
        if asym > SYMMETRY_TOL:
            raise StructuralError(f"covariance not symmetric (max asymmetry {asym:.3e})")
        nu = _symplectic_spectrum(cov)
        if nu[0] < VACUUM_VARIANCE - PHYSICALITY_TOL:
            raise PhysicalityError(
                f"smallest symplectic eigenvalue {nu[0]:.6g} below {VACUUM_VARIANCE}"
            )
        object.__setattr__(self, "mode_count", int(m))
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @classmethod
    def vacuum(cls, mode_count: int = 1) -> "GaussianState":
        n = 2 * mode_count
        return cls(np.zeros(n), VACUUM_VARIANCE * np.eye(n))

    @classmethod
    def thermal(cls, photons, mode_count: int = 1) -> "GaussianState":
        """Product of thermal states; ``photons`` is a scalar or one value per mode."""
        photons = np.broadcast_to(np.asarray(photons, dtype=float), (mode_count,))
        if np.any(photons < 0):
            raise StructuralError("thermal photon number must be >= 0")
        diag = np.repeat((2.0 * photons + 1.0) / 4.0, 2)
        return cls(np.zeros(2 * mode_count), np.diag(diag))

    def reduced(self, mode: int) -> "GaussianState":
        """Marginal state of a single mode (0-based index)."""
        if not 0 <= mode < self.mode_count:
            raise StructuralError(f"mode {mode} out of range for {self.mode_count} modes")
        sl = slice(2 * mode, 2 * mode + 2)
        return GaussianState(self.mean[sl], self.cov[sl, sl])

    def block(self, i: int, j: int) -> np.ndarray:
        return self.cov[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]

    def purity(self) -> float:
        """``1 / (4^m sqrt(det V))``; 1 for pure states."""
        return float(1.0 / (4.0**self.mode_count * np.sqrt(np.linalg.det(self.cov))))

    def mean_photon_number(self) -> float:
        """Total ``<a^dag a>`` summed over modes."""
        total = 0.0
        for k in range(self.mode_count):
            q, p = self.mean[2 * k : 2 * k + 2]
            total += self.cov[2 * k, 2 * k] + self.cov[2 * k + 1, 2 * k + 1] - 0.5 + q * q + p * p
        return float(total)

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.mode_count == other.mode_count
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"GaussianState(mode_count={self.mode_count}, mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True, eq=False)
class LinearChannel:
    """Gaussian channel ``mean -> T mean``, ``cov -> T cov T^T + N``."""

    transform: np.ndarray
    added_noise: np.ndarray = None

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.transform, dtype=float))
        rows, cols = t.shape
        if rows % 2 or cols % 2:
            raise StructuralError(f"transform shape {t.shape} is not 2m_out x 2m_in")
        n = np.zeros((rows, rows)) if self.added_noise is None else np.asarray(self.added_noise, dtype=float)
        if n.shape != (rows, rows):
            raise StructuralError(f"added_noise shape {n.shape} does not match output size {rows}")
        if np.max(np.abs(n - n.T), initial=0.0) > SYMMETRY_TOL:
            raise StructuralError("added_noise must be symmetric")
        if rows and np.linalg.eigvalsh(0.5 * (n + n.T))[0] < -PSD_TOL:
            raise StructuralError("added_noise must be positive semidefinite")
        object.__setattr__(self, "transform", _frozen(t))
        object.__setattr__(self, "added_noise", _frozen(n))

    @property
    def modes_in(self) -> int:
        return self.transform.shape[1] // 2

    @property
    def modes_out(self) -> int:
        return self.transform.shape[0] // 2

    @classmethod
    def identity(cls, mode_count: int = 1) -> "LinearChannel":
        return cls(np.eye(2 * mode_count))

    def is_symplectic(self, atol: float = 1e-12) -> bool:
        if self.modes_in != self.modes_out:
            return False
        om = symplectic_form(self.modes_in)
        t = self.transform
        return bool(np.allclose(t @ om @ t.T, om, rtol=0, atol=atol))


def compose(second: LinearChannel, first: LinearChannel) -> LinearChannel:
    """Channel equivalent to applying ``first`` and then ``second``."""
    if second.modes_in != first.modes_out:
        raise StructuralError(
            f"cannot compose: {first.modes_out}-mode output into {second.modes_in}-mode input"
        )
    t2 = second.transform
    noise = t2 @ first.added_noise @ t2.T + second.added_noise
    return LinearChannel(t2 @ first.transform, 0.5 * (noise + noise.T))


def direct_sum(*channels: LinearChannel) -> LinearChannel:
    """Independent channels acting on consecutive modes."""
    rows = sum(c.transform.shape[0] for c in channels)
    cols = sum(c.transform.shape[1] for c in channels)
    t = np.zeros((rows, cols))
    n = np.zeros((rows, rows))
    r = c = 0
    for ch in channels:
        dr, dc = ch.transform.shape
        t[r : r + dr, c : c + dc] = ch.transform
        n[r : r + dr, r : r + dr] = ch.added_noise
        r += dr
        c += dc
    return LinearChannel(t, n)


def embed(channel: LinearChannel, mode: int, mode_count: int) -> LinearChannel:
    """Lift a single-mode channel onto ``mode`` of a ``mode_count``-mode system."""
    if channel.modes_in != 1 or channel.modes_out != 1:
        raise StructuralError("embed expects a single-mode channel")
    if not 0 <= mode < mode_count:
        raise StructuralError(f"mode {mode} out of range for {mode_count} modes")
    parts = [LinearChannel.identity(1)] * mode_count
    parts[mode] = channel
    return direct_sum(*parts)


def apply_channel(state: GaussianState, ch: LinearChannel) -> GaussianState:
    if ch.modes_in != state.mode_count:
        raise StructuralError(
            f"channel expects {ch.modes_in} modes, state has {state.mode_count}"
        )
    t = ch.transform
    cov = t @ state.cov @ t.T + ch.added_noise
    cov = 0.5 * (cov + cov.T)
    try:
        return GaussianState(t @ state.mean, cov)
    except PhysicalityError as exc:
        raise InternalConsistencyError(f"channel produced an unphysical state: {exc}") from exc


def symplectic_eigenvalues(state: GaussianState) -> np.ndarray:
    """Symplectic spectrum, ascending, one value per mode."""
    return _symplectic_spectrum(state.cov)


# -- normally ordered moments -------------------------------------------------

MAX_ORDER = 4


def moment_keys(mode_count: int, max_order: int = MAX_ORDER):
    """All exponent tuples ``(n1, m1, ..., nk, mk)`` with total order <= max_order."""
    width = 2 * mode_count
    keys = [k for k in itertools.product(range(max_order + 1), repeat=width) if sum(k) <= max_order]
    return sorted(keys, key=lambda k: (sum(k), k))


def conjugate_key(key):
    """Exponent tuple of the Hermitian conjugate moment."""
    return tuple(x for pair in zip(key[1::2], key[0::2]) for x in pair)


@dataclass(frozen=True)
class MomentSet:
    """Normally ordered moments ``<(a^dag)^n a^m>`` keyed by exponent tuples.

    Single mode keys are ``(n, m)``; two-mode keys are ``(n1, m1, n2, m2)``
    for ``<(a1^dag)^n1 a1^m1 (a2^dag)^n2 a2^m2>``.
    """

    mode_count: int
    moments: dict

    def __post_init__(self):
        if self.mode_count not in (1, 2):
            raise StructuralError(f"MomentSet supports 1 or 2 modes, got {self.mode_count}")
        moments = {tuple(int(i) for i in k): complex(v) for k, v in dict(self.moments).items()}
        width = 2 * self.mode_count
        for k in moments:
            if len(k) != width or min(k) < 0 or sum(k) > MAX_ORDER:
                raise StructuralError(f"invalid moment key {k} for {self.mode_count} mode(s)")
        zero = (0,) * width
        if zero in moments and moments[zero] != 1:
            raise StructuralError("moment (0, ..., 0) must equal 1")
        moments[zero] = 1.0 + 0j
        for k, v in moments.items():
            ck = conjugate_key(k)
            if ck in moments and abs(moments[ck] - np.conj(v)) > 1e-12:
                raise StructuralError(f"moments {k} and {ck} violate Hermiticity")
        object.__setattr__(self, "moments", moments)

    def __getitem__(self, key):
        return self.moments[tuple(key)]

    def get(self, key, default=0.0):
        return self.moments.get(tuple(key), default)

    def is_complete(self, max_order: int = MAX_ORDER) -> bool:
        return all(k in self.moments for k in moment_keys(self.mode_count, max_order))

    def missing(self, max_order: int = MAX_ORDER):
        return [k for k in moment_keys(self.mode_count, max_order) if k not in self.moments]


def _ladder_stats(state: GaussianState):
    """Means of ``a_j`` and the normally ordered pair functions.

    Returns ``(alpha, n_mat, m_mat)`` with ``n_mat[j, k] = <da_j^dag da_k>`` and
    ``m_mat[j, k] = <da_j da_k>`` (central, normally ordered).
    """
    m = state.mode_count
    v = state.cov
    alpha = state.mean[0::2] + 1j * state.mean[1::2]
    n_mat = np.empty((m, m), dtype=complex)
    m_mat = np.empty((m, m), dtype=complex)
    for j in range(m):
        for k in range(m):
            qq = v[2 * j, 2 * k]
            pp = v[2 * j + 1, 2 * k + 1]
            qp = v[2 * j, 2 * k + 1]
            pq = v[2 * j + 1, 2 * k]
            n_mat[j, k] = qq + pp + 1j * (qp - pq)
            m_mat[j, k] = qq - pp + 1j * (qp + pq)
        n_mat[j, j] -= 0.5
    return alpha, n_mat, m_mat


def _wick(ops, alpha, n_mat, m_mat):
    """Expectation of a normally ordered product of ladder operators.

    ``ops`` is a list of ``(mode, dagger)`` with all daggers of a mode to the
    left of its annihilators.  Sums over all ways to split the product into
    singletons (means) and pairs (second-order cumulants).
    """
    if not ops:
        return 1.0 + 0j
    (j, dj), rest = ops[0], ops[1:]
    mean = np.conj(alpha[j]) if dj else alpha[j]
    total = mean * _wick(rest, alpha, n_mat, m_mat)
    for idx, (k, dk) in enumerate(rest):
        if dj and dk:
            pair = np.conj(m_mat[j, k])
        elif dj and not dk:
            pair = n_mat[j, k]
        elif not dj and dk:
            pair = n_mat[k, j]
        else:
            pair = m_mat[j, k]
        total += pair * _wick(rest[:idx] + rest[idx + 1 :], alpha, n_mat, m_mat)
    return total


def _ops_for_key(key):
    ops = []
    for mode in range(len(key) // 2):
        ops += [(mode, True)] * key[2 * mode] + [(mode, False)] * key[2 * mode + 1]
    return ops


def moments_from_state(state: GaussianState) -> MomentSet:
    """All normally ordered moments up to order 4 implied by a Gaussian state."""
    if state.mode_count not in (1, 2):
        raise StructuralError(f"moments supported for 1 or 2 modes, got {state.mode_count}")
    alpha, n_mat, m_mat = _ladder_stats(state)
    out = {}
    for key in moment_keys(state.mode_count):
        out[key] = complex(_wick(_ops_for_key(key), alpha, n_mat, m_mat))
    # enforce exact Hermitian pairs against rounding in the recursion
    for key in list(out):
        ck = conjugate_key(key)
        if ck > key:
            out[ck] = np.conj(out[key])
        elif ck == key:
            out[key] = complex(out[key].real, 0.0)
    return MomentSet(state.mode_count, out)


def _unit_key(mode_count, mode, dagger_count, annihilator_count):
    key = [0] * (2 * mode_count)
    key[2 * mode] += dagger_count
    key[2 * mode + 1] += annihilator_count
    return tuple(key)


def _pair_key(mode_count, j, dj, k, dk):
    key = [0] * (2 * mode_count)
    key[2 * j + (0 if dj else 1)] += 1
    key[2 * k + (0 if dk else 1)] += 1
    return tuple(key)


def state_from_moments(ms: MomentSet) -> GaussianState:
    """Gaussian state matching the first and second moments of ``ms``."""
    m = ms.mode_count
    needed = [k for k in moment_keys(m, 2)]
    missing = [k for k in needed if k not in ms.moments]
    if missing:
        raise StructuralError(f"missing moments {missing}")
    alpha = np.array([ms[_unit_key(m, j, 0, 1)] for j in range(m)])
    cov = np.zeros((2 * m, 2 * m))
    for j in range(m):
        for k in range(m):
            n_jk = ms[_pair_key(m, j, True, k, False)] - np.conj(alpha[j]) * alpha[k]
            m_jk = ms[_pair_key(m, j, False, k, False)] - alpha[j] * alpha[k]
            if j == k:
                n_jk += 0.5
            # invert n = qq + pp + i(qp - pq), m = qq - pp + i(qp + pq)
            cov[2 * j, 2 * k] = 0.5 * (n_jk.real + m_jk.real)
            cov[2 * j + 1, 2 * k + 1] = 0.5 * (n_jk.real - m_jk.real)
            cov[2 * j, 2 * k + 1] = 0.5 * (m_jk.imag + n_jk.imag)
            cov[2 * j + 1, 2 * k] = 0.5 * (m_jk.imag - n_jk.imag)
    mean = np.empty(2 * m)
    mean[0::2] = alpha.real
    mean[1::2] = alpha.imag
    cov = 0.5 * (cov + cov.T)
    return GaussianState(mean, cov)
