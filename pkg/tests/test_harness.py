import json
import math

import numpy as np
import pytest

from opdnp.harness import (ConfigError, config_from_dict, export_plot_data, parse_config,
                           read_results_csv, run_scenario, serialize, write_results_csv)
from opdnp.harness.cli import main
from opdnp.harness.runner import format_number, resolve_output, resolve_workers
from opdnp.results import SweepResult

FIELD_DOC = """
scenario = "field-profile"
preset = "trityl-tempo"
seed = 3

[overrides.spin]
D_ab = "30 MHz"
dipolar_angles = ["90 deg", "180 deg"]

[overrides.relax]
T1e_b = "1 ms"

[overrides.drive]
temperature = "100 K"
uw_nutation = "0.2 MHz"

[sweep]
B0 = ["18.6 T", "18.8 T"]

[options]
n_units = 2
n_boxes = 1
modes = ["optical"]
"""


def test_parse_converts_units():
    cfg = parse_config(FIELD_DOC)
    assert cfg.scenario == "field-profile" and cfg.seed == 3
    assert cfg.spin_spec().D_ab == 30e6
    assert cfg.spin_spec().dipolar_angles == pytest.approx((math.pi / 2, math.pi))
    assert cfg.relax_set().T1e_b == pytest.approx(1e-3)
    assert cfg.drive_config().uw_nutation == pytest.approx(0.2e6)
    assert cfg.sweep["B0"] == (18.6, 18.8)
    assert cfg.option("modes") == ("optical",)


def test_serialize_round_trip_and_hash():
    cfg = parse_config(FIELD_DOC)
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    assert serialize(again) == serialize(cfg)


def test_hash_ignores_key_order_workers_and_output():
    a = config_from_dict({"scenario": "j-scan", "seed": 1, "options": {"grid_n": 10}})
    b = config_from_dict({"options": {"grid_n": 10}, "seed": 1, "scenario": "j-scan",
                          "workers": 4, "output_dir": "/tmp/x"})
    assert a.config_hash() == b.config_hash()
    c = config_from_dict({"scenario": "j-scan", "seed": 2, "options": {"grid_n": 10}})
    assert c.config_hash() != a.config_hash()
    # equal physical values written in different units hash equally
    d1 = config_from_dict({"scenario": "masdnp-run", "overrides": {"drive": {"mas_rate": "8 kHz"}}})
    d2 = config_from_dict({"scenario": "masdnp-run",
                           "overrides": {"drive": {"mas_rate": "8000 Hz"}}})
    assert d1.config_hash() == d2.config_hash()


@pytest.mark.parametrize("doc,msg", [
    ({}, "missing required key"),
    ({"scenario": "nope"}, "expected one of"),
    ({"scenario": "j-scan", "bogus": 1}, "unknown key"),
    ({"scenario": "j-scan", "preset": "amupol"}, "preset"),
    ({"scenario": "masdnp-run", "overrides": {"drive": {"B0": 18.8}}}, "needs a unit"),
    ({"scenario": "masdnp-run", "overrides": {"drive": {"B0": "18.8 MHz"}}}, "dimension"),
    ({"scenario": "masdnp-run", "overrides": {"drive": {"B0": "-1 T"}}}, "out of range"),
    ({"scenario": "masdnp-run", "overrides": {"drive": {"optical_target": 1.5}}},
     "out of range"),
    ({"scenario": "masdnp-run", "overrides": {"rqm": {"J_CR": "-1 cm-1"}}}, "not valid"),
    ({"scenario": "masdnp-run", "overrides": {"spin": {"g_a": [2.0, 2.0]}}}, "3 entries"),
    ({"scenario": "masdnp-run", "overrides": {"relax": {"pumped": "c"}}}, "expected one of"),
    ({"scenario": "j-scan", "sweep": {"J_CR": ["1 cm-1"]}}, "out of range"),
    ({"scenario": "j-scan", "sweep": {"J_CR": []}}, "empty"),
    ({"scenario": "hp-sweep", "options": {"n_units": 0}}, "out of range"),
    ({"scenario": "hp-sweep", "options": {"n_units": 2.5}}, "integer"),
    ({"scenario": "hp-sweep", "seed": -1}, "seed"),
    ({"scenario": "hp-sweep", "workers": 0}, "workers"),
])
def test_validation_errors(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(doc)


def test_scenario_mismatch_and_malformed_toml():
    with pytest.raises(ConfigError, match="does not match"):
        parse_config('scenario = "j-scan"', scenario="hp-sweep")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("scenario = ")


def test_defaults_and_presets():
    assert config_from_dict({}, "j-scan").preset == "jscan-527"
    assert config_from_dict({}, "rqm-kinetics").preset == "ancoot-rqm"
    assert config_from_dict({}, "field-profile").preset == "trityl-tempo"


def test_resolution_precedence(monkeypatch, tmp_path):
    cfg = config_from_dict({"scenario": "j-scan", "workers": 3, "output_dir": "cfgout"})
    monkeypatch.setenv("OPDNP_WORKERS", "5")
    monkeypatch.setenv("OPDNP_OUT", str(tmp_path))
    assert resolve_workers(cfg, 2) == 2
    assert resolve_workers(cfg) == 3
    bare = config_from_dict({"scenario": "j-scan"})
    assert resolve_workers(bare) == 5
    assert str(resolve_output(cfg, "cli")) == "cli"
    assert str(resolve_output(cfg)) == "cfgout"
    assert resolve_output(bare) == tmp_path
    monkeypatch.delenv("OPDNP_WORKERS")
    monkeypatch.delenv("OPDNP_OUT")
    assert resolve_workers(bare) >= 1
    assert str(resolve_output(bare)) == "runs"


def test_results_csv_round_trip(tmp_path):
    res = SweepResult(["x", "y"], ["T", "1"], [[0.1, 1 / 3], [1e-300, -2.5e17]])
    p = tmp_path / "r.csv"
    write_results_csv(res, p)
    back = read_results_csv(p)
    assert back.rows == res.rows
    assert back.units == ["T", "1"]
    assert p.read_text().splitlines()[0] == "x [T],y [1]"
    assert float(format_number(0.1)) == 0.1


def _read_manifest(run_dir):
    return json.loads((run_dir / "manifest.json").read_text())


def test_run_j_scan_outputs(tmp_path):
    cfg = config_from_dict({"scenario": "j-scan", "sweep": {"J_CR": ["-11 cm-1", "-5 cm-1"]},
                            "options": {"grid_n": 200}})
    man, res = run_scenario(cfg, workers=1, out=tmp_path)
    d = tmp_path / man.run_dir.split("/")[-1]
    assert man.ok
    m = _read_manifest(d)
    assert m["status"] == "ok" and m["config_hash"] == cfg.config_hash()
    assert m["seed"] == 0 and m["scenario"] == "j-scan"
    for k in ("version", "timestamp", "tasks"):
        assert k in m
    assert parse_config((d / "config.toml").read_text()) == cfg
    back = read_results_csv(d / "results.csv")
    assert back.columns == ["J", "R_D1", "k_dq", "P"]
    assert back.column("P")[0] < -0.9
    assert json.loads((d / "diagnostics.json").read_text())["workers"] == 1
    # reruns land in a fresh directory
    man2, _ = run_scenario(cfg, workers=1, out=tmp_path)
    assert man2.run_dir != man.run_dir


def test_run_rqm_rates_and_kinetics(tmp_path):
    man, res = run_scenario(config_from_dict({"scenario": "rqm-rates",
                                              "options": {"grid_n": 100}}), 1, tmp_path)
    assert man.ok and len(res) == 6
    cfg = config_from_dict({"scenario": "rqm-kinetics",
                            "options": {"grid_n": 100, "n_times": 20, "t_end": "5 us",
                                        "irf_time": "50 ns"}})
    man, res = run_scenario(cfg, 1, tmp_path)
    assert man.ok
    assert res.columns[:2] == ["t", "normalized_esp"]
    pops = np.array([r[2:] for r in res.rows])
    np.testing.assert_allclose(pops.sum(axis=1), pops[0].sum(), rtol=1e-9)


def test_masdnp_run_non_convergence_is_reported(tmp_path):
    cfg = config_from_dict({"scenario": "masdnp-run",
                            "options": {"n_units": 2, "n_boxes": 1, "max_rotor_periods": 1}})
    man, res = run_scenario(cfg, 1, tmp_path)
    assert man.status == "not-converged" and not man.ok
    assert man.converged is False
    assert res is not None and res.diagnostics
    assert _read_manifest(tmp_path / man.run_dir.split("/")[-1])["status"] == "not-converged"


def test_failed_run_records_error(tmp_path):
    cfg = config_from_dict({"scenario": "fit-beff",
                            "options": {"input": str(tmp_path / "missing.csv")}})
    man, res = run_scenario(cfg, 1, tmp_path)
    assert man.status == "failed" and res is None
    assert "missing.csv" in man.error
    d = tmp_path / man.run_dir.split("/")[-1]
    assert not (d / "results.csv").exists()
    assert "error" in json.loads((d / "diagnostics.json").read_text())


def test_fit_beff_from_csv(tmp_path):
    B0 = [14.1, 16.0, 18.8, 21.1, 23.5]
    src = SweepResult(["B0", "eps_B_optical"], ["T", "1"],
                      [[b, -abs(40.0 - b) / b * 1000] for b in B0])
    p = tmp_path / "profile.csv"
    write_results_csv(src, p)
    man, res = run_scenario(config_from_dict({"scenario": "fit-beff",
                                              "options": {"input": str(p)}}), 1, tmp_path)
    assert man.ok
    assert res.column("B_eff")[0] > 18.8


def test_hp_sweep_determinism_across_workers(tmp_path):
    cfg = config_from_dict({"scenario": "hp-sweep", "sweep": {"P_target": [-0.5, 0.5]},
                            "options": {"n_units": 2, "n_boxes": 2, "with_uw": False}})
    m1, _ = run_scenario(cfg, 1, tmp_path / "w1")
    m2, _ = run_scenario(cfg, 2, tmp_path / "w2")
    a = (tmp_path / "w1" / m1.run_dir.split("/")[-1] / "results.csv").read_bytes()
    b = (tmp_path / "w2" / m2.run_dir.split("/")[-1] / "results.csv").read_bytes()
    assert a == b
    assert m1.config_hash == m2.config_hash


def test_export_plot_data(tmp_path):
    prof = SweepResult(["B0", "eps_B_optical", "eps_B_optical_uw", "converged"],
                       ["T", "1", "1", "1"], [[18.6, -10, -12, 1], [18.8, -20, -30, 1]])
    paths = export_plot_data(prof, "profile", tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["profile.json", "profile_optical.csv", "profile_optical_uw.csv"]
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert "-eps_B" in meta["sign_convention"]
    rows = (tmp_path / "profile_optical.csv").read_text().splitlines()
    assert rows[0].startswith("series")
    assert len(rows) == 3
    trace = SweepResult(["t", "normalized_esp"], ["s", "1"], [[0, 0], [1e-6, -3]])
    assert len(export_plot_data(trace, "trace", tmp_path)) == 2
    with pytest.raises(ValueError, match="normalized_esp"):
        export_plot_data(SweepResult(["t"], ["s"], [[0]]), "trace", tmp_path)
    with pytest.raises(ValueError, match="ascending"):
        export_plot_data(SweepResult(["t", "normalized_esp"], ["s", "1"], [[1, 0], [0, 0]]),
                         "trace", tmp_path)
    with pytest.raises(ValueError):
        export_plot_data(prof, "histogram", tmp_path)


def test_cli(tmp_path, capsys):
    cfg = tmp_path / "j.toml"
    cfg.write_text('scenario = "j-scan"\n[sweep]\nJ_CR = ["-11 cm-1"]\n'
                   '[options]\ngrid_n = 50\n')
    assert main(["j-scan", "--config", str(cfg), "--out", str(tmp_path / "runs"),
                 "--workers", "1", "--seed", "4"]) == 0
    run_dir = capsys.readouterr().out.strip()
    assert json.loads(open(f"{run_dir}/manifest.json").read())["seed"] == 4
    bad = tmp_path / "bad.toml"
    bad.write_text('scenario = "j-scan"\n[overrides.rqm]\nJ_CR = -3\n')
    assert main(["j-scan", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["j-scan", "--workers", "0"]) == 2
