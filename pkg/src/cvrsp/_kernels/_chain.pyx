# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused chain kernel.

Same contract as ``_chain_py.chain_covariances``: the packed parameter
vector, arrays of linear gains and PSA angles in, an ``(N, 4, 4)`` array of
joint covariances out.
"""

import numpy as np
from libc.math cimport cosh, sinh, cos, sin, sqrt, log, log10


cdef inline void _congruence(double[4][4] t, double[4][4] v) noexcept nogil:
    # v <- t v t^T
    cdef double tmp[4][4]
    cdef int i, j, k
    cdef double acc
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += t[i][k] * v[k][j]
            tmp[i][j] = acc
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += tmp[i][k] * t[j][k]
            v[i][j] = acc


cdef inline void _set_identity(double[4][4] t) noexcept nogil:
    cdef int i, j
    for i in range(4):
        for j in range(4):
            t[i][j] = 1.0 if i == j else 0.0


cdef inline void _set_squeeze(double[4][4] t, int mode, double r, double gamma) noexcept nogil:
    cdef double c = cosh(r), s = sinh(r)
    cdef double c2 = cos(2.0 * gamma), s2 = sin(2.0 * gamma)
    cdef int o = 2 * mode
    t[o][o] = c - s * c2
    t[o][o + 1] = s * s2
    t[o + 1][o] = s * s2
    t[o + 1][o + 1] = c + s * c2


cdef inline void _set_splitter(double[4][4] t, double tau) noexcept nogil:
    cdef double a = sqrt(tau), b = sqrt(1.0 - tau)
    _set_identity(t)
    t[0][0] = a
    t[1][1] = a
    t[2][2] = a
    t[3][3] = a
    t[0][2] = b
    t[1][3] = b
    t[2][0] = -b
    t[3][1] = -b


cdef inline void _loss(double[4][4] v, double e1, double e2) noexcept nogil:
    cdef double k[4]
    cdef int i, j
    k[0] = sqrt(1.0 - e1)
    k[1] = k[0]
    k[2] = sqrt(1.0 - e2)
    k[3] = k[2]
    for i in range(4):
        for j in range(4):
            v[i][j] *= k[i] * k[j]
    v[0][0] += e1 / 4.0
    v[1][1] += e1 / 4.0
    v[2][2] += e2 / 4.0
    v[3][3] += e2 / 4.0


def chain_covariances(double[::1] p, double[::1] gains, double[::1] gamma_fs):
    cdef Py_ssize_t npts = gains.shape[0]
    if gamma_fs.shape[0] != npts:
        raise ValueError("gains and gamma_fs must have equal length")
    if p.shape[0] != 16:
        raise ValueError("packed parameter vector must have 16 entries")
    out = np.empty((npts, 4, 4), dtype=np.float64)
    cdef double[:, :, ::1] res = out

    cdef double r1 = p[0], r2 = p[1], n1 = p[2], n2 = p[3]
    cdef double g10 = p[4], kappa = p[5], lam = p[6], kappa_db = p[7]
    cdef double gamma2 = p[8], eps = p[9], eta1 = p[10], eta2 = p[11]
    cdef double nf_slope = p[12], theta_f = p[13], tau = p[14], theta_rp = p[15]

    cdef double v[4][4]
    cdef double t[4][4]
    cdef double bs[4][4]
    cdef double cp[4][4]
    cdef double rot[4][4]
    cdef double s2q[4][4]
    cdef double gain, xgain, gamma1, noise, c, s
    cdef Py_ssize_t idx
    cdef int i, j

    _set_splitter(bs, 0.5)
    _set_splitter(cp, tau)
    _set_identity(rot)
    c = cos(theta_rp)
    s = sin(theta_rp)
    rot[2][2] = c
    rot[2][3] = s
    rot[3][2] = -s
    rot[3][3] = c
    _set_identity(s2q)
    _set_squeeze(s2q, 1, r2, gamma2)

    with nogil:
        for idx in range(npts):
            gain = gains[idx]
            xgain = 10.0 * log10(gain) if kappa_db != 0.0 else gain
            gamma1 = g10 + kappa * xgain + lam * gamma_fs[idx]

            for i in range(4):
                for j in range(4):
                    v[i][j] = 0.0
            v[0][0] = (1.0 + 2.0 * n1) / 4.0
            v[1][1] = v[0][0]
            v[2][2] = (1.0 + 2.0 * n2) / 4.0
            v[3][3] = v[2][2]

            for i in range(4):
                for j in range(4):
                    t[i][j] = s2q[i][j]
            _set_squeeze(t, 0, r1, gamma1)
            _congruence(t, v)

            _loss(v, eps, eps)
            _congruence(bs, v)
            _loss(v, eta1, eta2)

            noise = 0.5 * nf_slope * gain
            v[0][0] += noise
            v[1][1] += noise
            _set_identity(t)
            _set_squeeze(t, 0, 0.5 * log(gain), gamma_fs[idx] + theta_f)
            _congruence(t, v)

            _congruence(cp, v)
            _congruence(rot, v)

            for i in range(4):
                for j in range(4):
                    res[idx, i, j] = 0.5 * (v[i][j] + v[j][i])
    return out
