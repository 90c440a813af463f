import json

import numpy as np
import pytest

from chernoff_mehler import cli, experiments
from chernoff_mehler.errors import ConfigError, NumericalError
from chernoff_mehler.experiments import ExperimentConfig, REGISTRY, ResultTable, emit, load_table, registry_config, run_experiment

BASE = dict(name="tiny", measure={"kind": "dirac_zero"}, test_function={"name": "bump", "center": [0.0], "radius": 2.0},
            reference={"backend": "identity"}, grid={"box": [[-4.0, 4.0]], "resolution": 81})


def _dumps(table):
    return json.dumps(table.to_dict(), sort_keys=True)


@pytest.mark.parametrize("bad", [
    {"k_ladder": []}, {"k_ladder": [8, 8]}, {"k_ladder": [16, 8]}, {"k_ladder": [2.5]}, {"t": 0.0},
    {"mode": "exact"}, {"reference": {"backend": "nope"}}, {"radii": [5.0]}, {"radii": [-1.0]},
    {"test_function": {"radius": 1.0}}, {"tolerance": 0.0}, {"unknown_key": 1},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, **bad})


def test_config_missing_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"name": "x"})


def test_identity_errors_exactly_zero():
    table = run_experiment(registry_config("identity"))
    assert table.verdict == "pass"
    for r in table.rows:
        assert r["err_r1"] == 0 and r["err_r2"] == 0 and r["lp1"] == 0 and r["lpinf"] == 0
    assert [r["k"] for r in table.rows] == sorted(r["k"] for r in table.rows)


def test_single_row_csv_has_two_lines(tmp_path):
    table = run_experiment(ExperimentConfig.from_dict({**BASE, "k_ladder": [4]}))
    csv_path, json_path = emit(table, tmp_path)
    lines = open(csv_path).read().splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == ["k", "h", "err_r1", "err_r2", "lp1", "lp2", "lpinf", "supbound", "stderr", "seconds"]
    assert np.isnan(table.slope["slope"]) and table.slope["rows_used"] < 3


def test_json_round_trip_bit_exact(tmp_path):
    table = run_experiment(registry_config("clt", k_ladder=[4, 8, 16]))
    _, path = emit(table, tmp_path)
    back = load_table(path)
    assert isinstance(back, ResultTable)
    assert _dumps(back) == _dumps(table)
    doc = json.load(open(path))
    assert doc["config"]["name"] == "clt" and doc["version"]


def test_reproducible_grid_mode():
    cfg = registry_config("cpoisson", k_ladder=[4, 8, 16])
    assert run_experiment(cfg).same_results(run_experiment(cfg))


def test_reproducible_particle_mode_and_seed_matters():
    cfg = registry_config("clt", k_ladder=[4, 8, 16], mode="particle", n_paths=2000, seed=5)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.same_results(b)
    c = run_experiment(cfg, seed=6)
    assert not a.same_results(c)


def test_clt_intermediate_values_match_closed_form():
    table = run_experiment(registry_config("clt", k_ladder=[4, 16, 64]))
    for e in table.extras:
        assert e["value"] == pytest.approx(np.cos(1 / np.sqrt(e["k"])) ** e["k"], abs=1e-12)


def test_tolerance_scale_changes_verdict():
    cfg = registry_config("clt", k_ladder=[4, 8])
    assert run_experiment(cfg).verdict == "fail"
    assert run_experiment(cfg, tolerance_scale=1e3).verdict == "pass"


def test_registry_complete():
    assert set(REGISTRY) == {"identity", "clt", "heat", "cpoisson", "ou-exactflow", "ou-euler", "ou-rk4",
                             "sde-general", "counterexample"}


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_entry_executes(name):
    over = {"k_ladder": [4, 8, 16]}
    if name == "sde-general":
        over["reference"] = {"backend": "sde", "N": 500, "m": 64}
    if name.startswith("ou"):
        over["grid"] = {"box": [[-12.0, 12.0]], "resolution": 241, "interpolation": "cubic"}
    table = run_experiment(registry_config(name, **over))
    assert len(table.rows) == 3
    assert all(np.isfinite(r["err_r1"]) for r in table.rows)


def test_perturbation_schedule_vanishes():
    table = run_experiment(registry_config("heat", k_ladder=[8, 32, 128], perturb=True,
                                           grid={"box": [[-8.0, 8.0]], "resolution": 321, "interpolation": "cubic"}))
    errs = [r["err_r1"] for r in table.rows]
    assert errs[0] > errs[1] > errs[2]


def test_fit_slope_drops_noisy_rows():
    rows = [{"k": k, "err_r1": 1.0 / k, "stderr": 0.0} for k in (8, 16, 32, 64)]
    assert experiments.fit_slope(rows, 1)["slope"] == pytest.approx(-1.0)
    rows[-1]["stderr"] = 1.0
    fit = experiments.fit_slope(rows, 1)
    assert fit["rows_used"] == 3 and fit["slope"] == pytest.approx(-1.0)


def test_condition_suite_examples():
    rep = experiments.run_condition_suite({"measure": {"kind": "three_atom_counterexample"}})
    assert rep["M"].verdict == "pass" and rep["T"].verdict == "fail"
    rep = experiments.run_condition_suite({"measure": {"kind": "brownian"},
                                           "flow": {"kind": "runge_kutta", "A": [[-1.0]], "tableau": "rk4"}})
    assert all(v.verdict == "pass" for v in rep.values()), {k: v.verdict for k, v in rep.items()}
    rep = experiments.run_condition_suite({"measure": {"kind": "dirac_zero"}, "flow": {"kind": "identity"}})
    assert all(v.verdict == "pass" for v in rep.values())
    assert rep["M"].constants["sup_functional"] == 0 and rep["D"].constants["omega_hat"] == 0


def test_condition_suite_needs_a_block():
    with pytest.raises(ConfigError):
        experiments.run_condition_suite({})


# CLI

def test_cli_run_registry_pass(tmp_path, capsys):
    assert cli.main(["--out-dir", str(tmp_path), "run", "identity"]) == cli.EXIT_PASS
    assert (tmp_path / "identity.csv").exists() and (tmp_path / "identity.json").exists()
    assert "pass" in capsys.readouterr().out


def test_cli_run_tolerance_fail(tmp_path):
    cfg = {**BASE, "name": "clt-short", "measure": {"kind": "scaled_iid", "base": "rademacher"},
           "test_function": {"name": "cos"}, "reference": {"backend": "heat"}, "k_ladder": [4, 8], "tolerance": 1e-6}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["--out-dir", str(tmp_path), "run", str(path)]) == cli.EXIT_FAIL


@pytest.mark.parametrize("content", ["{not json", json.dumps({**BASE, "t": -1.0}), json.dumps({"name": "x"})])
def test_cli_config_errors_exit_2(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert cli.main(["--out-dir", str(tmp_path), "run", str(path)]) == cli.EXIT_CONFIG


def test_cli_unknown_registry_name_exit_2(tmp_path):
    assert cli.main(["--out-dir", str(tmp_path), "run", "no-such-experiment"]) == cli.EXIT_CONFIG


def test_cli_numerical_error_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("forced")
    monkeypatch.setattr(experiments, "run_experiment", boom)
    assert cli.main(["--out-dir", str(tmp_path), "run", "identity"]) == cli.EXIT_NUMERICAL


def test_cli_conditions_writes_json(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "conditions", json.dumps({"measure": {"kind": "three_atom_counterexample"}})])
    assert code == cli.EXIT_FAIL
    doc = json.load(open(tmp_path / "conditions.json"))
    assert doc["M"]["verdict"] == "pass" and doc["T"]["verdict"] == "fail"


def test_cli_list_and_selftest(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in REGISTRY)
    assert all(ok for _, ok in cli.selftest_checks())
    assert cli.main(["selftest"]) == 0
