"""numpy implementation of the fused chain kernel (fallback and reference)."""

import numpy as np

# order of the packed parameter vector, see protocol.pack_params
FIELDS = (
    "r1", "r2", "n1", "n2", "gamma1_0", "kappa", "lam", "kappa_db",
    "gamma2", "eps", "eta1", "eta2", "nf_slope", "theta_f", "tau", "theta_rp",
)


def _squeeze(r, gamma):
    c, s = np.cosh(r), np.sinh(r)
    c2, s2 = np.cos(2 * gamma), np.sin(2 * gamma)
    m = np.empty(np.shape(r) + (2, 2))
    m[..., 0, 0] = c - s * c2
    m[..., 0, 1] = s * s2
    m[..., 1, 0] = s * s2
    m[..., 1, 1] = c + s * c2
    return m


def _congruence(t, v):
    return np.einsum("...ij,...jk,...lk->...il", t, v, t)


def chain_covariances(p, gains, gamma_fs):
    p = dict(zip(FIELDS, np.asarray(p, dtype=float)))
    gains = np.asarray(gains, dtype=float)
    gamma_fs = np.asarray(gamma_fs, dtype=float)
    npts = gains.shape[0]

    xgain = 10.0 * np.log10(gains) if p["kappa_db"] else gains
    gamma1 = p["gamma1_0"] + p["kappa"] * xgain + p["lam"] * gamma_fs

    v = np.zeros((npts, 4, 4))
    v[:, 0, 0] = v[:, 1, 1] = (1.0 + 2.0 * p["n1"]) / 4.0
    v[:, 2, 2] = v[:, 3, 3] = (1.0 + 2.0 * p["n2"]) / 4.0

    t = np.zeros((npts, 4, 4))
    t[:, :2, :2] = _squeeze(np.full(npts, p["r1"]), gamma1)
    t[:, 2:, 2:] = _squeeze(p["r2"], p["gamma2"])
    v = _congruence(t, v)

    def loss(v, e1, e2):
        k = np.sqrt(np.array([1 - e1, 1 - e1, 1 - e2, 1 - e2]))
        v = v * k[:, None] * k[None, :]
        return v + np.diag([e1, e1, e2, e2]) / 4.0

    def splitter(tau):
        a, b = np.sqrt(tau), np.sqrt(1.0 - tau)
        eye = np.eye(2)
        return np.block([[a * eye, b * eye], [-b * eye, a * eye]])

    v = loss(v, p["eps"], p["eps"])
    bs = splitter(0.5)
    v = bs @ v @ bs.T
    v = loss(v, p["eta1"], p["eta2"])

    noise = 0.5 * p["nf_slope"] * gains
    v[:, 0, 0] += noise
    v[:, 1, 1] += noise
    t = np.tile(np.eye(4), (npts, 1, 1))
    t[:, :2, :2] = _squeeze(0.5 * np.log(gains), gamma_fs + p["theta_f"])
    v = _congruence(t, v)

    cp = splitter(p["tau"])
    v = cp @ v @ cp.T

    c, s = np.cos(p["theta_rp"]), np.sin(p["theta_rp"])
    rot = np.eye(4)
    rot[2:, 2:] = [[c, s], [-s, c]]
    v = rot @ v @ rot.T
    return 0.5 * (v + np.swapaxes(v, -1, -2))
