"""Run configuration: a YAML document in human units (dB, degrees).

Every key has a default, so a document only needs the entries it changes.
:func:`emit_config` always writes the full canonical document, which makes
``emit -> parse -> emit`` the identity.  See ``docs/config_schema.md``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import yaml

from . import components as comp
from .exceptions import ConfigError, CvrspError
from .fitting import PARAMETERS
from .protocol import CrosstalkSpec, RspParams

# Fit parameters whose human unit is degrees (kappa: degrees per unit gain).
DEGREE_PARAMETERS = frozenset({"theta_f", "theta_rp", "gamma1_0", "kappa"})


def _number(v, path, line):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if isinstance(v, str) and v.strip().lower() in ("-inf", "inf", "+inf"):
            return float(v)
        raise ConfigError(f"expected a number, got {v!r}", path, line)
    v = float(v)
    if math.isnan(v):
        raise ConfigError("NaN is not allowed", path, line)
    return v


def _finite(v, path, line):
    v = _number(v, path, line)
    if not math.isfinite(v):
        raise ConfigError("value must be finite", path, line)
    return v


def _nonneg(v, path, line):
    v = _finite(v, path, line)
    if v < 0:
        raise ConfigError(f"value must be >= 0, got {v}", path, line)
    return v


def _positive(v, path, line):
    v = _finite(v, path, line)
    if not v > 0:
        raise ConfigError(f"value must be > 0, got {v}", path, line)
    return v


def _beta(v, path, line):
    v = _number(v, path, line)
    if not v < 0:
        raise ConfigError(f"coupling must be negative dB (or -inf), got {v}", path, line)
    return v


def _gain(v, path, line):
    if v == "optimal":
        return v
    return _nonneg(v, path, line)


def _integer(minimum):
    def check(v, path, line):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"expected an integer, got {v!r}", path, line)
        if v < minimum:
            raise ConfigError(f"value must be >= {minimum}, got {v}", path, line)
        return int(v)

    return check


def _seed(v, path, line):
    v = _integer(0)(v, path, line)
    if v >= 2**64:
        raise ConfigError("seed must fit in 64 bits", path, line)
    return v


def _boolean(v, path, line):
    if not isinstance(v, bool):
        raise ConfigError(f"expected true or false, got {v!r}", path, line)
    return v


def _text(v, path, line):
    if not isinstance(v, str):
        raise ConfigError(f"expected a string, got {v!r}", path, line)
    return v


def _choice(*options):
    def check(v, path, line):
        v = str(v)
        if v not in options:
            raise ConfigError(f"expected one of {list(options)}, got {v!r}", path, line)
        return v

    return check


def _free_names(v, path, line):
    if not isinstance(v, list):
        raise ConfigError("expected a list of parameter names", path, line)
    for name in v:
        if name not in PARAMETERS:
            raise ConfigError(f"unknown fit parameter {name!r}; choose from {sorted(PARAMETERS)}", path, line)
    if len(set(v)) != len(v):
        raise ConfigError("fit parameters must be unique", path, line)
    return list(v)


def _bounds(v, path, line):
    if not isinstance(v, dict):
        raise ConfigError("expected a mapping of name: [lo, hi]", path, line)
    out = {}
    for name, pair in v.items():
        if name not in PARAMETERS:
            raise ConfigError(f"unknown fit parameter {name!r}", f"{path}.{name}", line)
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError("bounds must be [lo, hi]", f"{path}.{name}", line)
        lo, hi = (_finite(x, f"{path}.{name}", line) for x in pair)
        if not lo < hi:
            raise ConfigError("bounds need lo < hi", f"{path}.{name}", line)
        out[name] = [lo, hi]
    return out


def _optional_range(v, path, line):
    if v is None:
        return None
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError("expected [lo, hi] or null", path, line)
    lo, hi = (_finite(x, path, line) for x in v)
    if lo > hi:
        raise ConfigError("range needs lo <= hi", path, line)
    return [lo, hi]


def _metadata(v, path, line):
    if not isinstance(v, dict):
        raise ConfigError("metadata must be a mapping", path, line)
    return v


def _axis(default_start, default_stop, default_count):
    return {
        "start": (_finite, default_start),
        "stop": (_finite, default_stop),
        "count": (_integer(1), default_count),
    }


SCHEMA = {
    "label": (_text, ""),
    "seed": (_seed, 0),
    "model": {
        "symmetric_tms": (_boolean, False),
        "squeezer1": {"r": (_nonneg, 0.0), "n": (_nonneg, 0.0)},
        "squeezer2": {"r": (_nonneg, 0.0), "n": (_nonneg, 0.0), "gamma_deg": (_finite, 0.0)},
        "loss_pre_db": (_nonneg, 0.0),
        "loss_alice_db": (_nonneg, 0.0),
        "loss_bob_db": (_nonneg, 0.0),
        "psa": {
            "gain_db": (_gain, 0.0),
            "gamma_f_deg": (_finite, 0.0),
            "theta_f_deg": (_finite, 0.0),
            "noise_slope": (_nonneg, 0.0),
        },
        "coupler_beta_db": (_beta, -math.inf),
        "theta_rp_deg": (_finite, 0.0),
        "crosstalk": {
            "gamma1_0_deg": (_finite, 0.0),
            "kappa_deg": (_finite, 0.0),
            "lambda": (_finite, 0.0),
            "gain_units": (_choice("linear", "db"), "linear"),
        },
    },
    "sweep": {
        "gains_db": _axis(6.0, 18.0, 30),
        "angles_deg": _axis(-40.0, 40.0, 30),
        "entropy": (_boolean, False),
    },
    "fit": {
        "free": (_free_names, []),
        "bounds": (_bounds, {}),
        "weights": {"s_db": (_positive, 1.0), "a_db": (_positive, 1.0), "gamma_deg": (_positive, 1.0)},
        "max_evaluations": (_integer(1), 10_000),
    },
    "entropy": {"base": (_choice("e", "2", "10"), "e"), "report": (_boolean, False)},
    "oracle": {"samples": (_integer(10_000), 1_000_000)},
    "contour": {
        "samples": (_integer(2), 100),
        "gains_db": (_optional_range, None),
        "angles_deg": (_optional_range, None),
    },
    "output": {"dir": (_text, "out"), "wigner_contour": (_boolean, False)},
    "metadata": (_metadata, {}),
}


def _line_index(text):
    """Map dotted key paths to 1-based line numbers."""
    lines = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                lines[path] = key.start_mark.line + 1
                walk(value, path)

    if root is not None:
        walk(root, "")
    return lines


def _validate(doc, schema, prefix, lines):
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("expected a mapping", prefix or None, lines.get(prefix))
    unknown = [k for k in doc if k not in schema]
    if unknown:
        path = f"{prefix}.{unknown[0]}" if prefix else str(unknown[0])
        raise ConfigError("unknown key", path, lines.get(path))
    out = {}
    for key, rule in schema.items():
        path = f"{prefix}.{key}" if prefix else key
        if isinstance(rule, dict):
            out[key] = _validate(doc.get(key), rule, path, lines)
        else:
            check, default = rule
            out[key] = check(doc[key], path, lines.get(path)) if key in doc else _copy(default)
    return out


def _copy(v):
    if isinstance(v, dict):
        return {k: _copy(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_copy(x) for x in v]
    return v


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated configuration tree in human units."""

    data: dict

    def __eq__(self, other):
        return isinstance(other, RunConfig) and emit_config(self) == emit_config(other)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def sha256(self) -> str:
        return hashlib.sha256(emit_config(self).encode()).hexdigest()

    def axis(self, name):
        import numpy as np

        ax = self.data["sweep"][name]
        return [float(x) for x in np.linspace(ax["start"], ax["stop"], ax["count"])]

    def contour_range(self, name):
        rng = self.data["contour"][name]
        if rng is not None:
            return tuple(rng)
        ax = self.data["sweep"][name]
        return (ax["start"], ax["stop"])

    def params(self, gain_db=None) -> RspParams:
        """Model parameters; ``gain_db='optimal'`` is resolved by the caller."""
        m = self.data["model"]
        d = math.radians
        psa = m["psa"]
        gain = psa["gain_db"] if gain_db is None else gain_db
        if gain == "optimal":
            gain = 0.0
        ct = m["crosstalk"]
        try:
            return RspParams(
                squeezer1=comp.SqueezerSpec(m["squeezer1"]["r"], d(ct["gamma1_0_deg"]), m["squeezer1"]["n"]),
                squeezer2=comp.SqueezerSpec(m["squeezer2"]["r"], d(m["squeezer2"]["gamma_deg"]), m["squeezer2"]["n"]),
                loss_pre=comp.LossSpec.from_db(m["loss_pre_db"]),
                loss_alice=comp.LossSpec.from_db(m["loss_alice_db"]),
                loss_bob=comp.LossSpec.from_db(m["loss_bob_db"]),
                psa=comp.PsaSpec.from_db(gain, d(psa["gamma_f_deg"]), d(psa["theta_f_deg"]), psa["noise_slope"]),
                coupler=comp.CouplerSpec(m["coupler_beta_db"]),
                theta_rp=d(m["theta_rp_deg"]),
                crosstalk=CrosstalkSpec(d(ct["gamma1_0_deg"]), d(ct["kappa_deg"]), ct["lambda"], ct["gain_units"]),
                symmetric_tms=m["symmetric_tms"],
            )
        except CvrspError as exc:
            raise ConfigError(str(exc), "model") from exc

    def fit_bounds(self):
        """Bounds converted to internal units."""
        return {k: tuple(to_internal(k, v) for v in pair) for k, pair in self.data["fit"]["bounds"].items()}

    def with_params(self, params: RspParams) -> "RunConfig":
        """Copy with the model section replaced by ``params`` (e.g. a fit result)."""
        deg = math.degrees
        data = _copy(self.data)
        m = data["model"]
        ct = params.crosstalk
        m.update(
            {
                "symmetric_tms": params.symmetric_tms,
                "squeezer1": {"r": params.squeezer1.r, "n": params.squeezer1.n},
                "squeezer2": {
                    "r": params.squeezer2.r,
                    "n": params.squeezer2.n,
                    "gamma_deg": deg(params.squeezer2.gamma),
                },
                "loss_pre_db": params.loss_pre.db,
                "loss_alice_db": params.loss_alice.db,
                "loss_bob_db": params.loss_bob.db,
                "psa": {
                    "gain_db": comp.db_from_gain(params.psa.gain_linear),
                    "gamma_f_deg": deg(params.psa.gamma_f),
                    "theta_f_deg": deg(params.psa.theta_f),
                    "noise_slope": params.psa.noise_slope,
                },
                "coupler_beta_db": params.coupler.beta_db,
                "theta_rp_deg": deg(params.theta_rp),
                "crosstalk": {
                    "gamma1_0_deg": deg(ct.gamma1_0),
                    "kappa_deg": deg(ct.kappa),
                    "lambda": ct.lam,
                    "gain_units": ct.gain_units,
                },
            }
        )
        return parse_config(emit_config(RunConfig(data)))


def to_internal(name: str, value: float) -> float:
    return math.radians(value) if name in DEGREE_PARAMETERS else float(value)


def to_human(name: str, value: float) -> float:
    return math.degrees(value) if name in DEGREE_PARAMETERS else float(value)


def parse_config(text: str) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", None,
                          mark.line + 1 if mark else None) from exc
    return RunConfig(_validate(doc, SCHEMA, "", _line_index(text)))


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from exc
    return parse_config(text)


def emit_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.data, sort_keys=False, default_flow_style=None, allow_unicode=True)


def reference_config() -> RunConfig:
    """Configuration of the reference model at the optimal gain."""
    return parse_config(
        yaml.safe_dump(
            {
                "label": "reference",
                "model": {
                    "symmetric_tms": True,
                    "squeezer1": {"r": 1.2, "n": 0.04},
                    "squeezer2": {"r": 1.2, "n": 0.04, "gamma_deg": 135.0},
                    "loss_pre_db": 0.72,
                    "loss_alice_db": 0.35,
                    "loss_bob_db": 0.30,
                    "psa": {"gain_db": "optimal", "gamma_f_deg": 0.0, "theta_f_deg": 136.5, "noise_slope": 0.0059},
                    "coupler_beta_db": -14.6,
                    "theta_rp_deg": 68.5,
                    "crosstalk": {"gamma1_0_deg": 49.6, "kappa_deg": -0.17, "lambda": 0.02, "gain_units": "linear"},
                },
                "metadata": {"carrier_frequency_ghz": 5.435},
            },
            sort_keys=False,
        )
    )
