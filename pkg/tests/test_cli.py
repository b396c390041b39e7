import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cvrsp import __version__
from cvrsp.cli import main
from cvrsp.config import emit_config, load_config, parse_config
from cvrsp.fitting import get_param
from cvrsp.tables import read_table

CONFIGS = Path(__file__).parent.parent / "configs"


def write_config(tmp_path, text=None, name="run.yaml", **sweep):
    cfg = load_config(CONFIGS / "reference.yaml")
    if sweep:
        for axis, (start, stop, count) in sweep.items():
            cfg.data["sweep"][axis] = {"start": start, "stop": stop, "count": count}
    path = tmp_path / name
    path.write_text(text if text is not None else emit_config(cfg))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "cvrsp.cli", "simulate", "--config", cfg, "--out", tmp_path / "o"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "prepared.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["explode", "--config", "x.yaml"],
        ["simulate"],
        ["simulate", "--config", "x.yaml", "--seed", "-3"],
        ["simulate", "--config", "x.yaml", "--seed", str(2**64)],
        ["contour", "--config", "x.yaml", "--kind", "sideways"],
        ["oracle", "--config", "x.yaml", "--samples", "0"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 1


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("label: a\nmodel:\n  squeezer1: {r: -1}\n")
    assert run("simulate", "--config", bad, "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "model.squeezer1.r" in err and "line 3" in err
    assert run("simulate", "--config", tmp_path / "missing.yaml") == 2


def test_sweep_outputs(tmp_path):
    cfg = write_config(tmp_path, gains_db=(8.0, 14.0, 2), angles_deg=(-10.0, 10.0, 2))
    assert run("sweep", "--config", cfg, "--out", tmp_path / "o", "--seed", 7) == 0
    for name, column in [("s_rp.csv", "s_rp_db"), ("a_rp.csv", "a_rp_db"), ("gamma_rp.csv", "gamma_rp_deg"), ("mu.csv", "mu")]:
        meta, columns, rows = read_table(tmp_path / "o" / name)
        assert columns == ["gain_db", "gamma_f_deg", column]
        assert len(rows) == 4
        assert meta["tool"] == f"cvrsp {__version__}" and meta["seed"] == "7"
        assert meta["config_sha256"] == load_config(cfg).sha256


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, gains_db=(6.0, 18.0, 4), angles_deg=(-40.0, 40.0, 3))
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert run("sweep", "--config", cfg, "--out", out) == 0
        assert run("simulate", "--config", cfg, "--out", out) == 0
        assert run("contour", "--config", cfg, "--out", out, "--samples", 30) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) == 6


def test_identity_simulate(tmp_path):
    assert run("simulate", "--config", CONFIGS / "identity.yaml", "--out", tmp_path) == 0
    _, _, rows = read_table(tmp_path / "prepared.csv", numeric=False)
    values = {k: v for k, v in rows}
    assert abs(float(values["s_rp_db"])) < 1e-12
    assert abs(float(values["mu"]) - 1) < 1e-12
    assert values["degenerate"] == "true"


def test_simulate_optimal_gain_and_extras(tmp_path):
    cfg = load_config(CONFIGS / "reference.yaml")
    cfg.data["entropy"]["report"] = True
    cfg.data["output"]["wigner_contour"] = True
    path = tmp_path / "c.yaml"
    path.write_text(emit_config(cfg))
    assert run("simulate", "--config", path, "--out", tmp_path) == 0
    _, _, rows = read_table(tmp_path / "prepared.csv", numeric=False)
    values = {k: float(v) for k, v in rows if k != "degenerate"}
    assert math.isclose(values["gain_db"], 10 * math.log10(20.8283092173858), rel_tol=1e-6)
    assert 0 <= values["delta"] <= 0.15
    _, cols, pts = read_table(tmp_path / "wigner_contour.csv")
    assert cols == ["q", "p"] and len(pts) > 10


def test_fit_round_trip(tmp_path):
    data_dir = tmp_path / "data"
    assert run("sweep", "--config", CONFIGS / "reference_fit.yaml", "--out", data_dir) == 0
    start = load_config(CONFIGS / "reference_fit.yaml")
    start.data["model"]["squeezer1"].update(r=1.1, n=0.06)
    start.data["model"]["squeezer2"].update(r=1.1, n=0.06)
    start.data["model"]["psa"]["noise_slope"] = 0.008
    path = tmp_path / "start.yaml"
    path.write_text(emit_config(start))
    out = tmp_path / "fit"
    assert run("fit", "--config", path, "--observed", data_dir, "--out", out) == 0
    meta, cols, rows = read_table(out / "fit.csv", numeric=False)
    assert cols == ["name", "value", "ci95_low", "ci95_high"]
    fitted = {r[0]: float(r[1]) for r in rows}
    assert fitted.keys() == {"n", "r", "nf_prime"}
    assert math.isclose(fitted["r"], 1.2, rel_tol=0.02)
    assert math.isclose(fitted["n"], 0.04, rel_tol=0.02)
    assert math.isclose(fitted["nf_prime"], 0.0059, rel_tol=0.02)
    assert meta["converged"] == "true"
    cfg = load_config(out / "fitted_config.yaml")
    assert math.isclose(get_param(cfg.params(), "r"), fitted["r"], rel_tol=1e-12)
    assert parse_config(emit_config(cfg)) == cfg
    # the fitted config regenerates the observed data
    assert run("sweep", "--config", out / "fitted_config.yaml", "--out", tmp_path / "re") == 0
    _, _, a = read_table(data_dir / "s_rp.csv")
    _, _, b = read_table(tmp_path / "re" / "s_rp.csv")
    assert np.allclose(a, b, atol=1e-6)


def test_fit_reports_malformed_row(tmp_path, capsys):
    data_dir = tmp_path / "data"
    assert run("sweep", "--config", CONFIGS / "reference_fit.yaml", "--out", data_dir) == 0
    path = data_dir / "a_rp.csv"
    lines = path.read_text().splitlines()
    n_meta = sum(1 for line in lines if line.startswith("#"))
    bad = n_meta + 3
    lines[bad - 1] = "6.0,-40.0,abc"
    path.write_text("\n".join(lines) + "\n")
    assert run("fit", "--config", CONFIGS / "reference_fit.yaml", "--observed", data_dir, "--out", tmp_path) == 2
    assert f"line {bad}" in capsys.readouterr().err


def test_fit_reports_grid_mismatch(tmp_path, capsys):
    data_dir = tmp_path / "data"
    cfg = write_config(tmp_path, gains_db=(6.0, 18.0, 3), angles_deg=(-40.0, 40.0, 3))
    assert run("sweep", "--config", cfg, "--out", data_dir) == 0
    assert run("fit", "--config", CONFIGS / "reference_fit.yaml", "--observed", data_dir, "--out", tmp_path) == 2
    assert "rows do not match" in capsys.readouterr().err


def test_max_error_requires_fit(tmp_path, capsys):
    assert run("contour", "--config", CONFIGS / "reference.yaml", "--kind", "max-error", "--out", tmp_path) == 2
    assert "fit" in capsys.readouterr().err


@pytest.fixture(scope="module")
def noisy_fit_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("noisy")
    data = base / "data"
    assert run("sweep", "--config", CONFIGS / "reference_fit.yaml", "--out", data) == 0
    rng = np.random.default_rng(5)
    for name, sd in [("s_rp.csv", 0.1), ("a_rp.csv", 0.1), ("gamma_rp.csv", 1.0)]:
        path = data / name
        out = []
        for line in path.read_text().splitlines():
            if line.startswith("#") or line.startswith("gain_db"):
                out.append(line)
                continue
            g, a, v = line.split(",")
            out.append(f"{g},{a},{float(v) + rng.normal(0, sd)!r}")
        path.write_text("\n".join(out) + "\n")
    assert run("fit", "--config", CONFIGS / "reference_fit.yaml", "--observed", data, "--out", base / "fit") == 0
    return base / "fit"


def test_max_error_contour_seeded(tmp_path, noisy_fit_dir):
    fit = noisy_fit_dir / "fit.csv"
    args = ("contour", "--config", CONFIGS / "reference_fit.yaml", "--kind", "max-error", "--fit", fit, "--samples", 40)
    assert run(*args, "--out", tmp_path / "a", "--seed", 3) == 0
    assert run(*args, "--out", tmp_path / "b", "--seed", 3) == 0
    a = (tmp_path / "a" / "contour_max_error.csv").read_bytes()
    assert a == (tmp_path / "b" / "contour_max_error.csv").read_bytes()
    assert run(*args[:3], "--fit", fit, "--samples", 40, "--out", tmp_path / "d") == 0
    md, _, _ = read_table(tmp_path / "a" / "contour_max_error.csv")
    dd, _, _ = read_table(tmp_path / "d" / "contour_direct.csv")
    assert md["kind"] == "max-error" and dd["kind"] == "direct"
    assert float(md["area_deg_db"]) >= float(dd["area_deg_db"])


def test_contour_resolution_limit(tmp_path, capsys):
    assert run("contour", "--config", CONFIGS / "reference.yaml", "--samples", 100000, "--out", tmp_path) == 2


def test_oracle_command(tmp_path):
    assert run("oracle", "--config", CONFIGS / "reference.yaml", "--samples", 50000, "--out", tmp_path, "--seed", 2) == 0
    meta, cols, rows = read_table(tmp_path / "oracle.csv", numeric=False)
    assert meta["passed"] == "true" and len(rows) == 10
    assert run("oracle", "--config", CONFIGS / "reference.yaml", "--samples", 50000, "--out", tmp_path, "--mutate", "coupler-sign") == 2
