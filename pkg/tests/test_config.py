"""Config document parsing: strict validation, defaults, hashing."""

import json

import pytest

from nonext_bec import ConfigError, Variant, load_config
from nonext_bec.config import AUDIT_IDS, SCHEMA_VERSION, parse_config


def minimal():
    return {
        "schema_version": SCHEMA_VERSION,
        "model": {"variant": "non_extensive", "beta": 0.6, "lam": 0.5},
        "box": {"sides": [4, 6]},
    }


def test_minimal_config_parses_with_defaults():
    cfg = parse_config(minimal())
    assert cfg.threads == 1
    assert cfg.model.variant is Variant.NON_EXTENSIVE
    assert cfg.model.beta == 0.6
    assert cfg.box.sides == (4.0, 6.0)
    assert cfg.box.dimension == 3
    assert cfg.box.mode_cut == 1.5
    assert cfg.audit.ids == AUDIT_IDS
    assert cfg.tolerances.tail == 1e-12
    assert cfg.tolerances.audit == 1e-9


def test_need_reports_missing_sections():
    cfg = parse_config(minimal())
    assert cfg.need("model", "box") is cfg
    with pytest.raises(ConfigError):
        cfg.need("pressure")
    with pytest.raises(ConfigError):
        cfg.need("limits")


def test_schema_version_is_mandatory_and_checked():
    raw = minimal()
    del raw["schema_version"]
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw = minimal()
    raw["schema_version"] = 99
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_unknown_keys_rejected_everywhere():
    raw = minimal()
    raw["extra"] = 1
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw = minimal()
    raw["model"]["colour"] = "blue"
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw = minimal()
    raw["box"]["shape"] = "torus"
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_threads_bounds():
    raw = minimal()
    raw["threads"] = 8
    assert parse_config(raw).threads == 8
    for bad in (0, -1, 65, 1.5, "two"):
        raw["threads"] = bad
        with pytest.raises(ConfigError):
            parse_config(raw)


def test_model_constraints():
    raw = minimal()
    raw["model"] = {"variant": "imperfect", "beta": 0.6, "lam": 0.5}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["model"] = {"variant": "free", "beta": 0.6, "lam": 0.5}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["model"] = {"variant": "mean_field", "beta": 0.6, "lam": 0.0}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["model"] = {"variant": "mean_field", "beta": -1.0, "lam": 0.5}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["model"] = {"variant": "free", "beta": 0.6}
    assert parse_config(raw).model.lam == 0.0


def test_audit_block_validation():
    raw = minimal()
    raw["audit"] = {"ids": ["og", "in1"], "hooks": ["negate_in2"]}
    cfg = parse_config(raw)
    assert cfg.audit.ids == ("og", "in1")
    assert cfg.audit.hooks == ("negate_in2",)
    raw["audit"] = {"ids": ["og", "bogus"]}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["audit"] = {"hooks": ["drop_all"]}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["audit"] = {"grid": [{"variant": "free", "beta": 1.0, "rho": 0.2,
                              "side": 4}]}
    cfg = parse_config(raw)
    assert cfg.audit.grid[0]["variant"] is Variant.FREE
    assert cfg.audit.grid[0]["lam"] == 0.0
    raw["audit"] = {"grid": [{"variant": "free", "beta": 1.0}]}
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_limits_alpha_sign_check():
    raw = {
        "schema_version": SCHEMA_VERSION,
        "limits": {"alpha_values": [-1.0, 0.5]},
    }
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw["limits"] = {"alpha_values": [-1.0, 0.0],
                     "mu_values": [0.5], "beta_c_density": 1.0}
    cfg = parse_config(raw)
    assert cfg.limits.alpha_values == (-1.0, 0.0)
    assert cfg.limits.beta_c_density == 1.0


def test_load_config_records_hash(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(minimal()))
    cfg = load_config(path)
    assert len(cfg.sha256) == 64
    # the hash covers the raw bytes, so reformatting changes it
    path.write_text(json.dumps(minimal(), indent=2))
    assert load_config(path).sha256 != cfg.sha256


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(arr)
