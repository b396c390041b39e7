"""Feedforward sweeps, joint least-squares fits and phase-space contours."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats
from scipy.spatial import ConvexHull, QhullError

from . import components as comp
from .exceptions import StructuralError
from .gaussian import GaussianState
from .protocol import (
    PreparedStateSummary,
    RspParams,
    chain_covariances,
    summarize_covariances,
)
from .security import EntropyReport, otp_delta

OBSERVABLES = ("s_db", "a_db", "gamma_deg")
DEFAULT_WEIGHTS = {"s_db": 1.0, "a_db": 1.0, "gamma_deg": 1.0}
ITERATION_BUDGET = 10_000


# -- sweeps ----------------------------------------------------------------------


def _cov_from_observables(s_db, a_db, gamma_deg):
    """Single-mode covariance with the given squeezing, antisqueezing and angle."""
    sig_s = 0.25 * 10.0 ** (-s_db / 10.0)
    sig_a = 0.25 * 10.0 ** (a_db / 10.0)
    b = sig_a - sig_s
    two_g = 2.0 * math.radians(gamma_deg)
    vqq = 0.5 * (sig_s + sig_a - b * math.cos(two_g))
    vpp = 0.5 * (sig_s + sig_a + b * math.cos(two_g))
    vqp = 0.5 * b * math.sin(two_g)
    return np.array([[vqq, vqp], [vqp, vpp]])


@dataclass(frozen=True, eq=False)
class SweepGrid:
    """Prepared-state summaries on a ``gains x angles`` rectangle."""

    gains_db: tuple
    angles_deg: tuple
    cells: tuple
    entropy: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "gains_db", tuple(float(g) for g in self.gains_db))
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))
        shape = (len(self.gains_db), len(self.angles_deg))
        if 0 in shape:
            raise StructuralError("sweep grids must be non-empty")
        if len(self.cells) != shape[0] or any(len(row) != shape[1] for row in self.cells):
            raise StructuralError(f"cells do not match grid shape {shape}")
        if self.entropy is not None and (
            len(self.entropy) != shape[0] or any(len(row) != shape[1] for row in self.entropy)
        ):
            raise StructuralError(f"entropy cells do not match grid shape {shape}")

    @property
    def shape(self):
        return len(self.gains_db), len(self.angles_deg)

    def _field(self, fn):
        return np.array([[fn(c) for c in row] for row in self.cells], dtype=float)

    @property
    def s_db(self):
        return self._field(lambda c: c.s_rp_db)

    @property
    def a_db(self):
        return self._field(lambda c: c.a_rp_db)

    @property
    def gamma_deg(self):
        return self._field(lambda c: c.gamma_rp_deg)

    @property
    def mu(self):
        return self._field(lambda c: c.mu)

    @property
    def delta(self):
        if self.entropy is None:
            return None
        return np.array([[e.delta for e in row] for row in self.entropy], dtype=float)

    def observables(self):
        return {"s_db": self.s_db, "a_db": self.a_db, "gamma_deg": self.gamma_deg}

    @classmethod
    def from_observables(cls, gains_db, angles_deg, s_db, a_db, gamma_deg) -> "SweepGrid":
        """Grid from measured maps; each cell gets the matching single-mode covariance."""
        s_db, a_db, gamma_deg = (np.asarray(x, dtype=float) for x in (s_db, a_db, gamma_deg))
        shape = (len(gains_db), len(angles_deg))
        if not s_db.shape == a_db.shape == gamma_deg.shape == shape:
            raise StructuralError(f"observable maps must have shape {shape}")
        if not all(np.all(np.isfinite(x)) for x in (s_db, a_db, gamma_deg)):
            raise StructuralError("observable maps contain non-finite values")
        cells = []
        for i in range(shape[0]):
            row = []
            for j in range(shape[1]):
                cov = _cov_from_observables(s_db[i, j], a_db[i, j], gamma_deg[i, j])
                row.append(
                    PreparedStateSummary(
                        float(s_db[i, j]),
                        float(a_db[i, j]),
                        math.radians(gamma_deg[i, j]) % math.pi,
                        float(1.0 / (4.0 * math.sqrt(np.linalg.det(cov)))),
                        cov,
                    )
                )
            cells.append(tuple(row))
        return cls(tuple(gains_db), tuple(angles_deg), tuple(cells))


def _grid_covariances(params, gains_db, angles_deg):
    g = comp.gain_from_db(np.asarray(gains_db, dtype=float))[:, None]
    a = np.radians(np.asarray(angles_deg, dtype=float))[None, :]
    return chain_covariances(params, g, a)


def run_sweep(params: RspParams, gains_db, angles_deg, with_entropy: bool = False, base="e") -> SweepGrid:
    """Evaluate the chain on every ``(G_f, gamma_f)`` pair; rows follow ``gains_db``."""
    gains_db = [float(g) for g in gains_db]
    angles_deg = [float(a) for a in angles_deg]
    if not gains_db or not angles_deg:
        raise StructuralError("sweep grids must be non-empty")
    if min(gains_db) < 0:
        raise StructuralError("sweep gains must be >= 0 dB")
    covs = _grid_covariances(params, gains_db, angles_deg)
    summ = summarize_covariances(covs[..., 2:, 2:])
    cells, entropy = [], []
    for i in range(len(gains_db)):
        row, erow = [], []
        for j in range(len(angles_deg)):
            row.append(
                PreparedStateSummary(
                    float(summ["s_db"][i, j]),
                    float(summ["a_db"][i, j]),
                    float(summ["gamma"][i, j]),
                    float(summ["mu"][i, j]),
                    covs[i, j, 2:, 2:].copy(),
                    bool(summ["degenerate"][i, j]),
                )
            )
            if with_entropy:
                erow.append(otp_delta(GaussianState(np.zeros(4), covs[i, j]), base))
        cells.append(tuple(row))
        entropy.append(tuple(erow))
    return SweepGrid(gains_db, angles_deg, tuple(cells), tuple(entropy) if with_entropy else None)


# -- parameter registry ---------------------------------------------------------
#
# Fit-space values use the units of RspParams (radians, linear noise slope),
# except beta which is fitted in dB.


def _set_both_squeezers(attr):
    def setter(p, v):
        return replace(
            p,
            squeezer1=replace(p.squeezer1, **{attr: v}),
            squeezer2=replace(p.squeezer2, **{attr: v}),
        )

    return setter


PARAMETERS = {
    "n": (lambda p: p.squeezer1.n, _set_both_squeezers("n"), (0.0, 2.0)),
    "r": (lambda p: p.squeezer1.r, _set_both_squeezers("r"), (0.0, 3.0)),
    "nf_prime": (
        lambda p: p.psa.noise_slope,
        lambda p, v: replace(p, psa=replace(p.psa, noise_slope=v)),
        (0.0, 0.5),
    ),
    "beta_db": (
        lambda p: p.coupler.beta_db,
        lambda p, v: replace(p, coupler=comp.CouplerSpec(v)),
        (-40.0, -0.05),
    ),
    "theta_f": (
        lambda p: p.psa.theta_f,
        lambda p, v: replace(p, psa=replace(p.psa, theta_f=v)),
        (-2 * math.pi, 2 * math.pi),
    ),
    "theta_rp": (lambda p: p.theta_rp, lambda p, v: replace(p, theta_rp=v), (-2 * math.pi, 2 * math.pi)),
    "gamma1_0": (
        lambda p: p.crosstalk.gamma1_0,
        lambda p, v: replace(p, crosstalk=replace(p.crosstalk, gamma1_0=v)),
        (-2 * math.pi, 2 * math.pi),
    ),
    "kappa": (
        lambda p: p.crosstalk.kappa,
        lambda p, v: replace(p, crosstalk=replace(p.crosstalk, kappa=v)),
        (-0.1, 0.1),
    ),
    "lambda": (
        lambda p: p.crosstalk.lam,
        lambda p, v: replace(p, crosstalk=replace(p.crosstalk, lam=v)),
        (-1.0, 1.0),
    ),
}


def get_param(params: RspParams, name: str) -> float:
    return PARAMETERS[name][0](params)


def set_params(params: RspParams, names, values) -> RspParams:
    for name, v in zip(names, values):
        params = PARAMETERS[name][1](params, float(v))
    return params


# -- fitting -----------------------------------------------------------------------


def wrap_degrees(x):
    """Wrap angle differences into (-90, 90]."""
    return 90.0 - np.mod(90.0 - np.asarray(x, dtype=float), 180.0)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: RspParams
    free_names: tuple
    residual_rms: dict
    confidence_95: dict | None
    objective: float
    initial_objective: float
    converged: bool = True
    evaluations: int = 0
    gains_db: tuple = ()
    angles_deg: tuple = ()

    @property
    def values(self):
        return {name: get_param(self.params, name) for name in self.free_names}

    @property
    def intervals_available(self) -> bool:
        return self.confidence_95 is not None


def _model_observables(params, gains_db, angles_deg):
    covs = _grid_covariances(params, gains_db, angles_deg)
    s = summarize_covariances(covs[..., 2:, 2:])
    return s["s_db"], s["a_db"], np.degrees(s["gamma"])


def _residuals(params, grid, obs, weights):
    s, a, g = _model_observables(params, grid.gains_db, grid.angles_deg)
    return np.concatenate(
        [
            ((s - obs["s_db"]) / weights["s_db"]).ravel(),
            ((a - obs["a_db"]) / weights["a_db"]).ravel(),
            (wrap_degrees(g - obs["gamma_deg"]) / weights["gamma_deg"]).ravel(),
        ]
    )


def fit_objective(params: RspParams, observed: SweepGrid, weights=None) -> float:
    """Weighted sum of squared residuals over S, A and the wrapped angle."""
    w = {**DEFAULT_WEIGHTS, **(weights or {})}
    r = _residuals(params, observed, observed.observables(), w)
    return float(r @ r) if np.all(np.isfinite(r)) else math.inf


def _hessian(f, x, steps):
    p = len(x)
    h = np.empty((p, p))
    f0 = f(x)
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = steps[i]
        h[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / steps[i] ** 2
        for j in range(i):
            ej = np.zeros(p)
            ej[j] = steps[j]
            h[i, j] = h[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    return h


def fit_model(
    observed: SweepGrid,
    free_names,
    initial: RspParams,
    bounds=None,
    weights=None,
    max_evaluations: int = ITERATION_BUDGET,
) -> FitResult:
    """Least-squares fit of the chain model to measured ``(S, A, gamma)`` maps.

    The simplex search runs in coordinates scaled to the unit box given by
    ``bounds`` and restarts from the incumbent until it stops improving.
    Intervals come from the finite-difference curvature of the objective,
    scaled by the residual variance and a Student-t quantile.
    """
    free_names = tuple(free_names)
    unknown = [n for n in free_names if n not in PARAMETERS]
    if unknown:
        raise StructuralError(f"unknown free parameters {unknown}; choose from {sorted(PARAMETERS)}")
    if len(set(free_names)) != len(free_names):
        raise StructuralError("free parameter names must be unique")
    w = {**DEFAULT_WEIGHTS, **(weights or {})}
    if any(not v > 0 for v in w.values()):
        raise StructuralError("weights must be positive")
    box = {n: PARAMETERS[n][2] for n in free_names}
    box.update({k: tuple(v) for k, v in (bounds or {}).items() if k in box})
    lo = np.array([box[n][0] for n in free_names], dtype=float)
    hi = np.array([box[n][1] for n in free_names], dtype=float)
    if np.any(hi <= lo):
        raise StructuralError("each bound needs lo < hi")
    x0 = np.array([get_param(initial, n) for n in free_names], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise StructuralError("initial parameters lie outside the bounds")

    obs = observed.observables()
    n_res = 3 * observed.shape[0] * observed.shape[1]
    span = hi - lo

    def objective_x(x):
        try:
            r = _residuals(set_params(initial, free_names, x), observed, obs, w)
        except (StructuralError, ValueError, FloatingPointError):
            return math.inf
        return float(r @ r) if np.all(np.isfinite(r)) else math.inf

    initial_objective = objective_x(x0)
    if not free_names:
        rms = _rms(initial, observed, obs)
        return FitResult(initial, (), rms, {}, initial_objective, initial_objective, True, 1,
                         observed.gains_db, observed.angles_deg)

    def objective_u(u):
        return objective_x(lo + span * u)

    u = (x0 - lo) / span
    best = initial_objective
    evaluations = 0
    converged = False
    with np.errstate(all="ignore"):
        while evaluations < max_evaluations:
            res = optimize.minimize(
                objective_u,
                u,
                method="Nelder-Mead",
                bounds=[(0.0, 1.0)] * len(free_names),
                options={
                    "maxfev": max_evaluations - evaluations,
                    "xatol": 1e-10,
                    "fatol": 1e-14,
                    "adaptive": len(free_names) > 2,
                },
            )
            evaluations += res.nfev
            improved = res.fun < best - 1e-12 * max(1.0, abs(best))
            if res.fun <= best:
                u, best = res.x, res.fun
            if not improved:
                converged = bool(res.success)
                break
    x = lo + span * u
    fitted = set_params(initial, free_names, x)

    ci = _intervals(objective_x, free_names, x, lo, hi, best, n_res)
    rms = _rms(fitted, observed, obs)
    return FitResult(
        fitted, free_names, rms, ci, float(best), float(initial_objective), converged, evaluations,
        observed.gains_db, observed.angles_deg,
    )


def _rms(params, grid, obs):
    s, a, g = _model_observables(params, grid.gains_db, grid.angles_deg)
    return {
        "s_db": float(np.sqrt(np.mean((s - obs["s_db"]) ** 2))),
        "a_db": float(np.sqrt(np.mean((a - obs["a_db"]) ** 2))),
        "gamma_deg": float(np.sqrt(np.mean(wrap_degrees(g - obs["gamma_deg"]) ** 2))),
    }


def _intervals(f, names, x, lo, hi, chi2, n_res):
    p = len(x)
    dof = n_res - p
    if dof <= 0:
        return None
    steps = 1e-4 * np.maximum(np.abs(x), 1e-2 * (hi - lo))
    # keep the stencil inside the box when the optimum sits on a bound
    centre = np.clip(x, lo + 2.0 * steps, hi - 2.0 * steps)
    with np.errstate(all="ignore"):
        h = _hessian(f, centre, steps)
    if not np.all(np.isfinite(h)):
        return None
    eig = np.linalg.eigvalsh(0.5 * (h + h.T))
    if eig[0] <= 1e-12 * max(eig[-1], 1e-300):
        return None
    cov = 2.0 * np.linalg.inv(h) * (chi2 / dof)
    half = stats.t.ppf(0.975, dof) * np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return {
        name: (float(max(x[i] - half[i], lo[i])), float(min(x[i] + half[i], hi[i])))
        for i, name in enumerate(names)
    }



# -- contours ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhaseSpaceContour:
    """Polygon in the ``(gamma_rp [deg], S_rp [dB])`` plane, counter-clockwise."""

    polygon: np.ndarray
    kind: str
    area: float
    degenerate: bool = False
    sources: np.ndarray | None = None
    seed: int | None = None
    iterations: int = 0
    area_history: tuple = field(default_factory=tuple)

    def contains(self, point, tol: float = 0.0) -> bool:
        if self.degenerate or len(self.polygon) < 3:
            return bool(np.all(np.abs(self.polygon - np.asarray(point)) <= tol))
        x, y = point
        poly = self.polygon
        nxt = np.roll(poly, -1, axis=0)
        cross = (nxt[:, 0] - poly[:, 0]) * (y - poly[:, 1]) - (nxt[:, 1] - poly[:, 1]) * (x - poly[:, 0])
        return bool(np.all(cross >= -tol))


MAX_CONTOUR_SAMPLES = 2000


def _rectangle_lattice(gains_db, angles_deg, samples):
    if not 2 <= samples <= MAX_CONTOUR_SAMPLES:
        raise StructuralError(f"contour resolution must lie in [2, {MAX_CONTOUR_SAMPLES}], got {samples}")
    g0, g1 = (float(v) for v in gains_db)
    a0, a1 = (float(v) for v in angles_deg)
    gains, angles = np.meshgrid(np.linspace(g0, g1, samples), np.linspace(a0, a1, samples), indexing="ij")
    return gains.ravel(), angles.ravel()


def _rectangle_image(params, gains_db, angles_deg, samples, reference=None):
    """``(gamma_rp deg, S_rp dB)`` over a ``samples x samples`` lattice of the rectangle.

    Angles are placed in ``[reference - 90, reference + 90)``; the default
    reference is the image of the rectangle centre.
    """
    gains, angles = _rectangle_lattice(gains_db, angles_deg, samples)
    if min(gains) < 0:
        raise StructuralError("contour gains must be >= 0 dB")
    covs = chain_covariances(params, comp.gain_from_db(gains), np.radians(angles))
    s = summarize_covariances(covs[..., 2:, 2:])
    gamma = np.degrees(s["gamma"])
    if reference is None:
        centre = len(gamma) // 2
        reference = gamma[centre]
    gamma = reference + wrap_degrees(gamma - reference)
    return np.column_stack([gamma, s["s_db"]]), np.column_stack([gains, angles]), reference


def _hull(points, sources=None):
    """Convex hull; ``None`` when the cloud has no area."""
    spread = np.ptp(points, axis=0)
    if np.all(spread < 1e-9):
        return None
    try:
        hull = ConvexHull(points)
    except QhullError:
        return None
    idx = hull.vertices
    start = np.lexsort((points[idx, 1], points[idx, 0]))[0]
    idx = np.roll(idx, -start)
    src = None if sources is None else sources[idx]
    return points[idx], src, float(hull.volume)


def _degenerate_contour(points, kind, sources=None, **extra):
    centre = points.mean(axis=0, keepdims=True)
    src = None if sources is None else sources[:1]
    return PhaseSpaceContour(centre, kind, 0.0, True, src, **extra)


def direct_contour(fit, gains_db, angles_deg, samples: int = 100) -> PhaseSpaceContour:
    """Convex boundary of the image of the ``(G_f, gamma_f)`` rectangle.

    ``fit`` may be a :class:`FitResult` or plain :class:`RspParams`.  The
    rectangle is sampled on a ``samples x samples`` lattice, edges included.
    Interior points matter: the squeezing maximum near the optimal gain is a
    fold of the map, not the image of an edge.  ``sources`` holds the
    ``(G_f dB, gamma_f deg)`` pair behind each vertex.
    """
    params = fit.params if isinstance(fit, FitResult) else fit
    pts, src, _ = _rectangle_image(params, gains_db, angles_deg, samples)
    hull = _hull(pts, src)
    if hull is None:
        return _degenerate_contour(pts, "direct", src)
    poly, vsrc, area = hull
    return PhaseSpaceContour(poly, "direct", area, False, vsrc)


def max_error_contour(
    fit: FitResult,
    gains_db,
    angles_deg,
    seed: int,
    samples: int = 100,
    rel_tol: float = 1e-3,
    patience: int = 25,
    max_iterations: int = 5000,
) -> PhaseSpaceContour:
    """Union hull over parameter sets drawn uniformly from the 95% intervals.

    Stops once the relative area change stays below ``rel_tol`` for
    ``patience`` consecutive draws.  The generator is PCG64 seeded with ``seed``.
    """
    if not isinstance(fit, FitResult) or not fit.intervals_available:
        raise StructuralError("confidence intervals unavailable: run 'fit' first and pass its result")
    rng = np.random.default_rng(seed)
    names = fit.free_names
    lo = np.array([fit.confidence_95[n][0] for n in names], dtype=float)
    hi = np.array([fit.confidence_95[n][1] for n in names], dtype=float)
    cloud, _, ref = _rectangle_image(fit.params, gains_db, angles_deg, samples)
    hull = _hull(cloud)
    area = 0.0 if hull is None else hull[2]
    if hull is not None:
        cloud = hull[0]
    history = [area]
    quiet = 0
    it = 0
    while quiet < patience and it < max_iterations:
        it += 1
        draw = rng.uniform(lo, hi) if len(names) else np.empty(0)
        try:
            params = set_params(fit.params, names, draw)
            pts, _, _ = _rectangle_image(params, gains_db, angles_deg, samples, reference=ref)
        except (StructuralError, ValueError):
            quiet += 1
            history.append(area)
            continue
        merged = np.vstack([cloud, pts])
        hull = _hull(merged)
        new_area = 0.0 if hull is None else hull[2]
        cloud = merged if hull is None else hull[0]
        change = abs(new_area - area) / area if area > 0 else (0.0 if new_area == 0 else math.inf)
        quiet = quiet + 1 if change < rel_tol else 0
        area = max(new_area, area)
        history.append(area)
    extra = {"seed": int(seed), "iterations": it, "area_history": tuple(history)}
    if hull is None:
        return _degenerate_contour(cloud, "max_error", **extra)
    return PhaseSpaceContour(hull[0], "max_error", hull[2], False, None, **extra)
