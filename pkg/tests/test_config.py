from pathlib import Path

import pytest

from firerisk.config import DEFAULTS, default_manifest, load_config
from firerisk.errors import ConfigError


def test_defaults_without_file():
    cfg = load_config()
    assert cfg["seed"] == DEFAULTS["seed"]
    assert cfg["firecat"]["manifest"] == default_manifest()


def test_nested_merge(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("firecat:\n  n_rounds: 5\n")
    cfg = load_config(p)
    assert cfg["firecat"]["n_rounds"] == 5
    assert cfg["firecat"]["max_depth"] == DEFAULTS["firecat"]["max_depth"]


def test_defaults_not_mutated(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("targets:\n  cuts: [0.3, 0.6]\n")
    load_config(p)["gam"]["terms"].append("x")
    assert DEFAULTS["targets"]["cuts"] == [0.40, 0.75]
    assert "x" not in DEFAULTS["gam"]["terms"]


def test_relative_paths_resolve_against_file(tmp_path):
    (tmp_path / "sub").mkdir()
    p = tmp_path / "sub" / "c.yaml"
    p.write_text("paths:\n  incidents: data/inc.csv\n  cpi: /abs/cpi.csv\n")
    cfg = load_config(p)
    assert Path(cfg["paths"]["incidents"]) == tmp_path / "sub" / "data" / "inc.csv"
    assert cfg["paths"]["cpi"] == "/abs/cpi.csv"


def test_seed_required(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: null\n")
    with pytest.raises(ConfigError, match="seed"):
        load_config(p)


@pytest.mark.parametrize("cuts", [[0.75, 0.4], [0.0, 0.5], [0.5, 1.0], [0.4, 0.4], [0.2, 0.5, 0.7]])
def test_bad_cuts(tmp_path, cuts):
    p = tmp_path / "c.yaml"
    p.write_text(f"targets:\n  cuts: {cuts}\n")
    with pytest.raises(ConfigError):
        load_config(p)


@pytest.mark.parametrize("text", ["[1, 2]\n", "seed: [unclosed\n"])
def test_malformed_file(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")


def test_override_beats_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 3\n")
    assert load_config(p, {"seed": 9})["seed"] == 9


@pytest.mark.parametrize("name", ["example.yaml", "synthetic.yaml"])
def test_shipped_configs_load(name):
    path = Path(__file__).resolve().parents[1] / "configs" / name
    cfg = load_config(path)
    assert isinstance(cfg["seed"], int)
