"""Command-line interface: outputs, exit codes, determinism, failure paths.

Commands run in-process through main(argv); each test gets its own out dir.
"""

import csv
import json

import pytest

from nonext_bec.cli import main


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def modes_config(tmp_path):
    return write_config(tmp_path, {
        "schema_version": 1,
        "model": {"variant": "free", "beta": 1.0},
        "box": {"sides": [3, 4]},
    })


def test_modes_command_outputs(tmp_path, modes_config):
    out = tmp_path / "out"
    assert run(["modes", "--config", modes_config, "--out", out]) == 0
    rows = read_csv(out / "modes.csv")
    sides = {r["L"] for r in rows}
    assert sides == {"3", "4"}
    ground = [r for r in rows if r["L"] == "3" and r["norm2"] == "0"]
    assert len(ground) == 1
    assert ground[0]["degeneracy"] == "1"
    assert ground[0]["energy"] == "0"
    summary = json.loads((out / "modes_summary.json").read_text())
    assert summary["command"] == "modes"
    assert summary["schema_version"] == 1
    assert len(summary["config_sha256"]) == 64


def test_default_out_directory(tmp_path, modes_config, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["modes", "--config", modes_config]) == 0
    assert (tmp_path / "out" / "modes.csv").exists()


def test_missing_config_file_exits_2(tmp_path):
    assert run(["modes", "--config", tmp_path / "nope.json"]) == 2


def test_invalid_config_exits_2(tmp_path):
    bad = write_config(tmp_path, {"schema_version": 1, "mdoel": {}})
    assert run(["modes", "--config", bad, "--out", tmp_path / "o"]) == 2


def test_missing_section_exits_2(tmp_path):
    cfg = write_config(tmp_path, {
        "schema_version": 1,
        "model": {"variant": "free", "beta": 1.0},
    })
    assert run(["modes", "--config", cfg, "--out", tmp_path / "o"]) == 2


def test_unknown_flag_value_exits_2(tmp_path, modes_config):
    # --seedless is a bare flag; handing it a value must abort parsing
    assert run(["modes", "--config", modes_config, "--seedless=1"]) == 2
    assert run(["bogus-command"]) == 2


def test_limits_command_values(tmp_path):
    cfg = write_config(tmp_path, {
        "schema_version": 1,
        "model": {"variant": "non_extensive", "beta": 0.6037732186507889,
                  "lam": 0.5},
        "limits": {"alpha_values": [-1.0, -0.25, 0.0],
                   "mu_values": [0.25, 0.8],
                   "beta_c_density": 1.0},
    })
    out = tmp_path / "out"
    assert run(["limits", "--config", cfg, "--out", out]) == 0
    alpha_rows = read_csv(out / "limits_alpha.csv")
    assert len(alpha_rows) == 3
    for r in alpha_rows:
        assert abs(float(r["pressure_rel_dev"])) < 1e-10
        assert abs(float(r["density_rel_dev"])) < 1e-10
    mu_rows = read_csv(out / "limits_mu.csv")
    cond = {float(r["mu"]): r["condensed"] for r in mu_rows}
    assert cond == {0.25: "false", 0.8: "true"}
    summary = json.loads((out / "limits_summary.json").read_text())
    assert abs(summary["beta_c_closed"] - 0.30188660932539446) < 1e-14
    assert abs(summary["beta_c_closed"] - summary["beta_c_root"]) < 1e-12


def test_limits_mu_without_lam_exits_2(tmp_path):
    cfg = write_config(tmp_path, {
        "schema_version": 1,
        "model": {"variant": "free", "beta": 1.0},
        "limits": {"mu_values": [0.5]},
    })
    assert run(["limits", "--config", cfg, "--out", tmp_path / "o"]) == 2


def test_oracle_check_passes_and_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, {"schema_version": 1})
    outs = []
    for threads in (1, 2):
        out = tmp_path / f"out{threads}"
        rc = run(["oracle-check", "--config", cfg, "--out", out,
                  "--threads", threads])
        assert rc == 0
        outs.append((out / "oracle_check.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "out1" / "oracle_check.csv")
    assert len(rows) >= 10
    assert all(float(r["max_rel_dev"]) < 1e-10 for r in rows)


def test_audit_command_and_negate_hook(tmp_path):
    grid = [
        {"variant": "non_extensive", "beta": 0.9, "rho": 0.7, "lam": 0.75,
         "side": 4},
        {"variant": "mean_field", "beta": 0.8, "rho": 0.6, "lam": 0.6,
         "side": 4},
    ]
    good = write_config(tmp_path, {
        "schema_version": 1,
        "audit": {"grid": grid},
    }, name="good.json")
    out = tmp_path / "out"
    assert run(["audit", "--config", good, "--out", out]) == 0
    rows = read_csv(out / "audit.csv")
    assert all(r["status"] in ("pass", "skipped") for r in rows)
    assert {r["audit_id"] for r in rows} <= {
        "og", "in1", "in2", "in3", "lemma4", "lemma5", "p1-jensen",
        "pres-order",
    }
    summary = json.loads((out / "audit_summary.json").read_text())
    assert summary["all_passed"] is True

    hooked = write_config(tmp_path, {
        "schema_version": 1,
        "audit": {"grid": grid, "hooks": ["negate_in2"]},
    }, name="hooked.json")
    out2 = tmp_path / "out2"
    assert run(["audit", "--config", hooked, "--out", out2]) == 4
    rows2 = read_csv(out2 / "audit.csv")
    assert any(r["status"] == "fail" and r["audit_id"] == "in2" for r in rows2)


def test_audit_id_filter(tmp_path):
    cfg = write_config(tmp_path, {
        "schema_version": 1,
        "audit": {
            "grid": [{"variant": "free", "beta": 1.2, "rho": 0.1, "lam": 0.0,
                      "side": 4}],
            "ids": ["og", "in1"],
        },
    })
    out = tmp_path / "out"
    assert run(["audit", "--config", cfg, "--out", out]) == 0
    rows = read_csv(out / "audit.csv")
    assert {r["audit_id"] for r in rows} == {"og", "in1"}


def test_pressure_free_cross_check_and_columns(tmp_path):
    cfg = write_config(tmp_path, {
        "schema_version": 1,
        "model": {"variant": "free", "beta": 0.8},
        "box": {"sides": [3, 4]},
        "pressure": {"mu_values": [-0.9, -0.3]},
    })
    out = tmp_path / "out"
    assert run(["pressure", "--config", cfg, "--out", out]) == 0
    rows = read_csv(out / "pressure.csv")
    assert len(rows) == 4
    assert list(rows[0]) == ["L", "V", "mu", "pressure_finite",
                             "pressure_mf_finite", "pressure_mf_limit",
                             "alpha_star", "tail_mass"]
    for r in rows:
        # free gas: the mean-field twin is the gas itself
        assert r["pressure_finite"] == r["pressure_mf_finite"]
        assert float(r["pressure_finite"]) > 0.0


def test_sweep_command_small_free(tmp_path):
    cfg = write_config(tmp_path, {
        "schema_version": 1,
        "model": {"variant": "free", "beta": 0.6037732186507889},
        "box": {"sides": [3, 4, 5]},
        "sweep": {"rho": 0.15, "deltas": [0.9]},
    })
    out = tmp_path / "out"
    assert run(["sweep", "--config", cfg, "--out", out]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [r["L"] for r in rows] == ["3", "4", "5"]
    assert "band_density_0.9" in rows[0]
    summary = json.loads((out / "sweep_summary.json").read_text())
    assert summary["classification"] in (
        "none", "ground-state", "generalized", "non-extensive"
    )
