import pytest
import yaml

from facegrowth.config import SCHEMA_VERSION, SMOKE_MODELS, ConfigError, config_digest, load, resolve


def test_defaults():
    cfg = resolve()
    assert cfg.seed == 0 and cfg.source == "synth"
    assert len(cfg.scenarios) == 45 and len(cfg.models) == 16
    assert (cfg.plan.folds, cfg.plan.repeats) == (5, 20)
    assert cfg.synth.seed == 0 and cfg.synth.n_patients == 639


def test_seed_override_propagates():
    cfg = resolve({"seed": 3}, seed=9)
    assert cfg.seed == 9 and cfg.plan.master_seed == 9 and cfg.synth.seed == 9


def test_smoke_preset():
    cfg = resolve(smoke=True)
    assert cfg.smoke and cfg.synth.n_patients == 60
    assert cfg.models == SMOKE_MODELS and len(cfg.scenarios) == 3 and cfg.plan.repeats == 2


@pytest.mark.parametrize("doc, fragment", [
    ({"seeds": 1}, "unknown config key"),
    ({"cv": {"fold": 3}}, "unknown config keys in 'cv'"),
    ({"cv": 5}, "must be a mapping"),
    ({"schema_version": 2}, "schema_version"),
    ({"seed": -1}, "non-negative"),
    ({"input": {"source": "ftp"}}, "input.source"),
    ({"input": {"source": "file"}}, "path is missing"),
    ({"input": {"source": "file", "path": "/no/such/file.csv"}}, "does not exist"),
    ({"input": {"synth": {"n_patient": 3}}}, "unknown synth"),
    ({"panel": ["SN-MP", "XYZ"]}, "unknown measurements"),
    ({"alignment": {"mode": "pairwise"}}, "alignment.mode"),
    ({"scenarios": ["ceph/13/FA"]}, "scenarios"),
    ({"scenarios": []}, "selects nothing"),
    ({"models": ["CNN"]}, "models"),
    ({"training": {"lr": 1}}, "unknown training"),
    ({"cv": {"folds": 1}}, "folds"),
])
def test_validation_errors(doc, fragment):
    with pytest.raises(ConfigError, match=fragment):
        resolve(doc)


def test_yaml_file_and_relative_input(tmp_path):
    (tmp_path / "data.csv").write_text("x")
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({
        "schema_version": SCHEMA_VERSION, "seed": 4, "input": {"source": "file", "path": "data.csv"},
        "models": ["LR", "RF(100)"], "scenarios": ["ceph/12-9/SN-MP"], "cv": {"repeats": 3}}))
    cfg = load(tmp_path / "c.yaml")
    assert cfg.path == tmp_path / "data.csv"
    assert cfg.models == ("LR", "RF(100)") and cfg.plan.repeats == 3 and cfg.seed == 4


def test_bad_yaml(tmp_path):
    (tmp_path / "c.yaml").write_text("seed: [1, 2\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load(tmp_path / "c.yaml")
    (tmp_path / "d.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load(tmp_path / "d.yaml")
    with pytest.raises(ConfigError, match="cannot read"):
        load(tmp_path / "missing.yaml")


def test_digest_tracks_content():
    a, b = resolve({"seed": 1}), resolve({"seed": 1})
    assert a.digest == b.digest == config_digest(a.raw)
    assert resolve({"seed": 2}).digest != a.digest
    assert resolve({"cv": {"repeats": 3}}).digest != resolve().digest
