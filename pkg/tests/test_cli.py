import csv
import io
import json

import numpy as np
import pytest

from entmeter import cli, states
from entmeter.tensorkit import random_density, save_state


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_pure_singlet(capsys, tmp_path):
    path = tmp_path / "singlet.json"
    save_state(path, states.singlet())
    code, out, _ = run(capsys, "pure", "--state", str(path), "--monotone", "concurrence")
    doc = json.loads(out)
    assert code == 0
    assert doc["value"] == pytest.approx(1.0)
    assert doc["raw_expectation"] == pytest.approx(0.25)


@pytest.mark.parametrize("name,monotone", [("product:2x2", "concurrence"), ("product:2x2x2", "tangle"),
                                           ("product:3x3", "gconc3"), ("product:4x4", "gconc4")])
def test_pure_product_states_give_zero(capsys, name, monotone):
    code, out, _ = run(capsys, "pure", "--state", name, "--monotone", monotone)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(0.0, abs=1e-6)


def test_pure_raw_flag(capsys):
    code, out, _ = run(capsys, "pure", "--state", "ghz", "--monotone", "tangle", "--raw")
    assert json.loads(out)["value"] == pytest.approx(0.25)


def test_pure_rejects_density_file(capsys, tmp_path, rng):
    path = tmp_path / "rho.json"
    save_state(path, random_density((2, 2), None, rng))
    code, out, err = run(capsys, "pure", "--state", str(path))
    assert code == 2
    assert out == ""
    assert "pure" in err


@pytest.mark.parametrize("argv", [
    ["pure", "--state", "nonsense"],
    ["pure", "--state", "singlet", "--monotone", "gconc3"],
    ["bound", "--state", "ghz"],
    ["bound", "--state", "werner:2"],
])
def test_input_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert err.startswith("entmeter: error")


def test_malformed_state_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(capsys, "pure", "--state", str(path))[0] == 2


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["pure", "--state", "singlet", "--bogus"])
    assert exc.value.code == 2


def test_bound_werner(capsys):
    code, out, _ = run(capsys, "bound", "--state", "werner:0.9", "--alpha1", "0.5")
    doc = json.loads(out)
    assert code == 0
    assert 0.0 <= doc["bound"] <= 0.85
    assert doc["oracle"] == pytest.approx(0.85)
    assert doc["status"] == "certified"


def test_bound_maximally_mixed(capsys):
    assert json.loads(run(capsys, "bound", "--state", "maxmixed:2x2")[1])["bound"] == 0.0
    doc = json.loads(run(capsys, "bound", "--state", "maxmixed:2x2", "--no-clamp")[1])
    assert doc["bound"] < 0


def test_bound_bad_alpha(capsys):
    code, out, err = run(capsys, "bound", "--state", "singlet", "--alpha1", "1.5")
    assert code == 2 and out == "" and "alpha1" in err


def test_audit_exit_codes(capsys):
    code, out, _ = run(capsys, "audit", "--alpha1", "0.5", "--trials", "2000")
    assert code == 0 and json.loads(out)["violations"] == 0
    code, out, err = run(capsys, "audit", "--trials", "500", "--flip-sign")
    assert code == 3
    assert json.loads(out)["violations"] > 0
    assert "violations" in err


def test_audit_is_deterministic_given_seed(capsys, monkeypatch):
    a = run(capsys, "audit", "--trials", "300", "--seed", "4")[1]
    b = run(capsys, "audit", "--trials", "300", "--seed", "4")[1]
    monkeypatch.setenv("ENTMETER_SEED", "4")
    c = run(capsys, "audit", "--trials", "300")[1]
    assert a == b == c


def test_bad_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("ENTMETER_SEED", "abc")
    assert run(capsys, "audit", "--trials", "10")[0] == 2


def _sweep(capsys, *extra):
    code, out, _ = run(capsys, "sweep-werner", *extra)
    assert code == 0
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(io.StringIO(out))]


def test_sweep_grid_and_limits(capsys):
    rows = _sweep(capsys, "--points", "11")
    assert len(rows) == 11
    assert np.allclose([r["p"] for r in rows], np.linspace(0, 1, 11))
    assert rows[-1]["bound"] == pytest.approx(1.0, abs=1e-9)
    assert rows[-1]["wootters"] == pytest.approx(1.0, abs=1e-9)
    for r in rows:
        if r["p"] <= 1 / 3:
            assert r["bound"] == 0.0 and r["wootters"] == 0.0
    oracle = [r["wootters"] for r in rows]
    assert oracle == sorted(oracle)


def test_sweep_json_and_bad_points(capsys):
    code, out, _ = run(capsys, "sweep-werner", "--points", "3", "--format", "json")
    assert code == 0 and len(json.loads(out)) == 3
    assert run(capsys, "sweep-werner", "--points", "1")[0] == 2


def test_experiment(capsys, tmp_path):
    cfg = {
        "source": {"ensemble": [{"p": 1.0, "state": "singlet"}]},
        "channel": {"kind": "depolarizing", "q": 0.05},
        "shots": 20_000,
        "seed": 1,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "experiment", "--config", str(path))
    doc = json.loads(out)
    assert code == 0
    assert doc["geometric_mean_ok"] is True
    assert doc["storage_steps"] == [1, 0]
    again = run(capsys, "experiment", "--config", str(path))[1]
    assert again == out
    assert run(capsys, "experiment", "--config", str(path), "--shots", "0")[0] == 2


def test_experiment_bad_config(capsys, tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"source": {"ensemble": [{"p": 0.5, "state": "singlet"}]}}))
    assert run(capsys, "experiment", "--config", str(path))[0] == 2
    assert run(capsys, "experiment", "--config", str(tmp_path / "missing.json"))[0] == 2


@pytest.mark.parametrize("which,state,expected", [
    ("wootters", "werner:0.8", 0.7),
    ("ckw", "ghz", 1.0),
    ("gconc", "maxent4", 1.0),
    ("negativity", "singlet", 0.5),
    ("entropy", "singlet", np.log(2)),
])
def test_oracle_subcommand(capsys, which, state, expected):
    code, out, _ = run(capsys, "oracle", "--state", state, "--which", which)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(expected)


def test_oracle_roof(capsys):
    code, out, _ = run(capsys, "oracle", "--state", "werner:0.8", "--which", "roof", "--iterations", "3000")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(0.7, abs=1e-3)


def test_oracle_kind_mismatch(capsys):
    assert run(capsys, "oracle", "--state", "werner:0.5", "--which", "ckw")[0] == 2
    assert run(capsys, "oracle", "--state", "singlet", "--which", "ckw")[0] == 2
