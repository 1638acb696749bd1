import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from dcone_lab.cli import main
from dcone_lab.config import config_from_dict, load_config
from dcone_lab.errors import ConfigError

SMALL_SWEEP = {
    "h_schedule": [0.1, 0.05],
    "grid": {"Nr": 24, "n_theta": 48, "cells_per_core": 16},
    "minimizer": {"max_iters": 60, "coarse_iters": 40, "levels": 2, "log_every": 0},
}


def write_config(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def run(tmp_path, *args, config=None, out="out"):
    argv = list(args) + ["--out", str(tmp_path / out)]
    if config is not None:
        argv += ["--config", write_config(tmp_path, config)]
    return main(argv)


def manifest(tmp_path, command, out="out"):
    return json.loads((tmp_path / out / command / "manifest.json").read_text())


def assert_manifest_complete(tmp_path, command, out="out"):
    d = tmp_path / out / command
    m = manifest(tmp_path, command, out)
    on_disk = {p.name for p in d.iterdir() if p.name != "manifest.json"}
    assert set(m["files"]) == on_disk, "every output file listed, no orphans"
    return m


# ----------------------------------------------------------------- config


def test_default_config():
    cfg = config_from_dict({})
    assert cfg.p == 2.5 and cfg.profile_name == "paper-default"
    assert cfg.h_schedule == (0.1, 0.05, 0.025, 0.0125)
    assert cfg.minimizer.h_schedule == cfg.h_schedule
    assert len(cfg.ansatz_h) == 9


@pytest.mark.parametrize(
    "bad",
    [
        {"nonsense": 1},
        {"p": "two"},
        {"p": 0.5},
        {"h_schedule": [0.05, 0.1]},
        {"h_schedule": []},
        {"profile": "no-such-preset"},
        {"profile": {"cos": [1.0], "tan": [2.0]}},
        {"grid": {"Nr": 4}},
        {"grid": {"bogus": 1}},
        {"minimizer": {"max_iters": -1}},
        {"minimizer": {"h_schedule": [0.1]}},
        {"degree": {"resolution": 2}},
        {"seed": -3},
        {"output_dir": ""},
    ],
)
def test_bad_configs_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config_yaml_and_json(tmp_path):
    cfg = load_config(write_config(tmp_path, {"p": 2.2, "profile": {"cos": [2.0, 0.0, 0.0, 1.0]}}))
    assert cfg.p == 2.2 and cfg.profile.cos_coeffs == (2.0, 0.0, 0.0, 1.0)
    assert cfg.to_dict()["profile"] == {"cos": [2.0, 0.0, 0.0, 1.0], "sin": []}
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"seed": 4}))
    assert load_config(j).seed == 4
    (tmp_path / "broken.yaml").write_text("p: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.yaml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


# -------------------------------------------------------- validate-profile


def test_validate_paper_default(tmp_path, capsys):
    assert run(tmp_path, "validate-profile") == 0
    rep = json.loads((tmp_path / "out/validate-profile/profile_report.json").read_text())
    assert rep["admissible"] is True
    assert abs(rep["condition1"] - rep["condition1_closed_form"]) < 1e-10
    assert_manifest_complete(tmp_path, "validate-profile")


def test_validate_sine_exit_1(tmp_path, capsys):
    assert run(tmp_path, "validate-profile", config={"profile": "sine"}) == 1
    assert "condition2" in capsys.readouterr().out


def test_malformed_config_exit_2(tmp_path, capsys):
    assert run(tmp_path, "validate-profile", config={"p": "x"}) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["exponents", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


# ------------------------------------------------------------ ansatz-sweep


def _fit(tmp_path, out="out"):
    return json.loads((tmp_path / out / "ansatz-sweep/ansatz_fit.json").read_text())


@pytest.mark.parametrize("p, expect", [(2.5, 5 / 3), (2.2, 11 / 6)])
def test_ansatz_sweep_slope(tmp_path, p, expect):
    assert run(tmp_path, "ansatz-sweep", "--threads", "2", config={"p": p}) == 0
    fit = _fit(tmp_path)
    assert abs(fit["fitted_slope"] - expect) <= 0.05
    assert fit["theoretical_slope"] == pytest.approx(expect)
    with open(tmp_path / "out/ansatz-sweep/ansatz_sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9
    assert list(rows[0]) == ["h", "core_radius", "E_membrane", "E_bending_raw", "E_bending", "E_total"]
    assert_manifest_complete(tmp_path, "ansatz-sweep")


def test_ansatz_sweep_single_h(tmp_path):
    with pytest.warns(UserWarning, match="two h values"):
        assert run(tmp_path, "ansatz-sweep", config={"ansatz_h": [0.05]}) == 0
    assert _fit(tmp_path)["fitted_slope"] == "nan"


def test_ansatz_sweep_inadmissible(tmp_path):
    assert run(tmp_path, "ansatz-sweep", config={"profile": "sine"}) == 1


def test_ansatz_sweep_byte_identical(tmp_path):
    cfg = {"ansatz_h": [0.1, 0.05, 0.025]}
    assert run(tmp_path, "ansatz-sweep", config=cfg, out="a") == 0
    assert run(tmp_path, "ansatz-sweep", config=cfg, out="b") == 0
    for name in ("ansatz_sweep.csv", "ansatz_fit.json"):
        assert (tmp_path / "a/ansatz-sweep" / name).read_bytes() == (tmp_path / "b/ansatz-sweep" / name).read_bytes()
    ma, mb = manifest(tmp_path, "ansatz-sweep", "a"), manifest(tmp_path, "ansatz-sweep", "b")
    assert ma["files"] == mb["files"] and ma["config_digest"] == mb["config_digest"]


# ---------------------------------------------------------- minimize-sweep


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sweep")
    code = run(tmp, "minimize-sweep", config=SMALL_SWEEP)
    return tmp, code


def test_minimize_sweep_outputs(sweep_dir):
    tmp, code = sweep_dir
    assert code == 1  # entries stop short of grad_tol on a 60-iteration budget
    m = assert_manifest_complete(tmp, "minimize-sweep")
    assert m["status"] == "complete"
    assert [e["h"] for e in m["entries"]] == [0.1, 0.05]
    rep = json.loads((tmp / "out/minimize-sweep/scaling_report.json").read_text())
    assert rep["theoretical_slope"] == pytest.approx(5 / 3)
    assert math.isfinite(rep["fitted_slope"])
    assert {"state_h0.csv", "state_h1.csv", "scaling_report.csv", "scaling_entries.json"} <= set(m["files"])


def test_minimize_sweep_deterministic(sweep_dir):
    tmp, _ = sweep_dir
    assert run(tmp, "minimize-sweep", config=SMALL_SWEEP, out="again") == 1
    a = tmp / "out/minimize-sweep"
    b = tmp / "again/minimize-sweep"
    for name in ("scaling_report.csv", "state_h0.csv", "state_h1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ra = json.loads((a / "scaling_report.json").read_text())
    rb = json.loads((b / "scaling_report.json").read_text())
    for ea, eb in zip(ra["entries"], rb["entries"]):
        assert abs(ea["breakdown"]["total"] - eb["breakdown"]["total"]) <= 1e-12 * abs(ea["breakdown"]["total"])


def test_minimize_sweep_resumes(sweep_dir):
    tmp, _ = sweep_dir
    src = tmp / "out/minimize-sweep"
    # simulate an interruption after the first h
    d = tmp / "cut/minimize-sweep"
    d.mkdir(parents=True)
    entries = json.loads((src / "scaling_entries.json").read_text())
    (d / "scaling_entries.json").write_text(json.dumps({"entries": entries["entries"][:1], "last_state": "state_h0.csv"}))
    (d / "state_h0.csv").write_bytes((src / "state_h0.csv").read_bytes())
    m = json.loads((src / "manifest.json").read_text())
    m["status"] = "running"
    m["entries"] = m["entries"][:1]
    m["files"] = {k: v for k, v in m["files"].items() if k in ("scaling_entries.json", "state_h0.csv")}
    (d / "manifest.json").write_text(json.dumps(m))

    assert run(tmp, "minimize-sweep", "-v", config=SMALL_SWEEP, out="cut") == 1
    full = json.loads((src / "scaling_report.json").read_text())
    resumed = json.loads((d / "scaling_report.json").read_text())
    assert [e["breakdown"]["total"] for e in resumed["entries"]] == [e["breakdown"]["total"] for e in full["entries"]]
    assert (d / "state_h1.csv").read_bytes() == (src / "state_h1.csv").read_bytes()
    assert_manifest_complete(tmp, "minimize-sweep", "cut")


def test_minimize_sweep_fresh_ignores_old_run(sweep_dir):
    tmp, _ = sweep_dir
    assert run(tmp, "minimize-sweep", "--fresh", config=SMALL_SWEEP, out="again") == 1
    assert_manifest_complete(tmp, "minimize-sweep", "again")


# -------------------------------------------------------------- degree-map


def test_degree_map_paper_default(tmp_path, capsys):
    assert run(tmp_path, "degree-map") == 0
    w = json.loads((tmp_path / "out/degree-map/witness.json").read_text())
    assert w["witness"]["integral"] > 0
    assert w["pullback"]["rel_err"] < 0.02
    assert "rel_err" in capsys.readouterr().out
    assert_manifest_complete(tmp_path, "degree-map")


def test_degree_map_unit_circle(tmp_path):
    assert run(tmp_path, "degree-map", config={"profile": "unit-circle", "degree": {"resolution": 60}}) == 0
    with open(tmp_path / "out/degree-map/degree_field.csv") as fh:
        rows = list(csv.DictReader(fh))
    z = np.array([[float(r["z1"]), float(r["z2"])] for r in rows])
    deg = np.array([int(r["deg"]) for r in rows])
    r = np.hypot(z[:, 0], z[:, 1])
    assert np.all(deg[r < 0.9] == 1) and np.all(deg[r > 1.1] == 0)
    w = json.loads((tmp_path / "out/degree-map/witness.json").read_text())
    assert w["pullback"] is None  # constant beta has no closed cone


def test_degree_map_sine_no_witness(tmp_path):
    assert run(tmp_path, "degree-map", config={"profile": "sine", "degree": {"resolution": 40}}) == 1


# --------------------------------------------------------------- exponents


def test_exponents(tmp_path):
    assert run(tmp_path, "exponents", "--p", "2.5") == 0
    row = json.loads((tmp_path / "out/exponents/exponents.json").read_text())
    assert row["alpha"] == pytest.approx(4 / 7) and row["p_prime"] == pytest.approx(5 / 3)
    assert run(tmp_path, "exponents", "--p", "3.0") == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "dcone_lab", "exponents", "--p", "2.2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0 and "p_prime" in out.stdout
