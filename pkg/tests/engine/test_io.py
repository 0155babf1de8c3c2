"""Configuration loading, precedence and validation errors."""

import json
from pathlib import Path

import pytest
import yaml

from wito.engine.domain import CorrelationModel
from wito.engine.io import IOConfigError, build_config, load_config, load_profile


def _write_yaml(path: Path, data: dict) -> Path:
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_defaults_validate_for_every_suite() -> None:
    for suite in ("hermite-check", "diagram-moments", "chaos-verify", "spectral-limit", "renormalize", "fbm", "tails"):
        config, merged = build_config(suite)
        assert config.suite == suite
        assert merged == {"suite": suite}


def test_unknown_suite() -> None:
    with pytest.raises(IOConfigError, match="unknown suite"):
        build_config("lattice-gauge")


def test_precedence_profile_file_overrides(tmp_path: Path) -> None:
    profile = _write_yaml(
        tmp_path / "quick.yaml",
        {
            "id": "quick",
            "description": "small budgets",
            "defaults": {"replicates": 100, "seed": 3},
            "suites": {"fbm": {"replicates": 200, "fbm": {"grid": 16}}},
        },
    )
    cfg_file = _write_yaml(tmp_path / "fbm.yaml", {"suite": "fbm", "seed": 9, "fbm": {"hurst": [0.4]}})
    config, merged = build_config("fbm", config_path=cfg_file, profile=str(profile), overrides={"workers": 2})
    assert config.replicates == 200
    assert config.seed == 9
    assert config.workers == 2
    assert config.fbm.grid == 16
    assert config.fbm.hurst == (0.4,)
    assert merged["profile"]["id"] == "quick"
    assert merged["profile"]["description"] == "small budgets"


def test_none_overrides_are_ignored() -> None:
    config, _ = build_config("tails", overrides={"seed": None, "replicates": 50})
    assert config.seed == 0
    assert config.replicates == 50


def test_profile_lookup_in_profiles_dir(tmp_path: Path) -> None:
    (tmp_path / "profiles").mkdir()
    _write_yaml(tmp_path / "profiles" / "tiny.yaml", {"defaults": {"replicates": 7}})
    anchor = _write_yaml(tmp_path / "exp.yaml", {"suite": "tails"})
    part, meta = load_profile("tiny", "tails", anchor)
    assert part == {"replicates": 7}
    assert meta["id"] == "tiny"
    with pytest.raises(IOConfigError, match="could not be located"):
        load_profile("missing-profile", "tails", anchor)
    assert load_profile(None, "tails") == ({}, None)


def test_load_config_requires_suite(tmp_path: Path) -> None:
    path = _write_yaml(tmp_path / "nosuite.yaml", {"seed": 1})
    with pytest.raises(IOConfigError, match="does not name a suite"):
        load_config(path)
    ok = _write_yaml(tmp_path / "ok.yaml", {"suite": "diagram-moments", "diagrams": {"m": 3, "max_rows": 3}})
    config = load_config(ok)
    assert config.diagrams.m == 3


def test_json_config(tmp_path: Path) -> None:
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"suite": "hermite-check", "hermite_check": {"max_order": 5}}), encoding="utf-8")
    assert load_config(path).hermite_check.max_order == 5


def test_suite_mismatch(tmp_path: Path) -> None:
    path = _write_yaml(tmp_path / "fbm.yaml", {"suite": "fbm"})
    with pytest.raises(IOConfigError, match="not 'tails'"):
        build_config("tails", config_path=path)


@pytest.mark.parametrize(
    "payload, field",
    [
        ({"model": {"alpha": 1.5}}, "model"),
        ({"model": {"nu": 3}}, "model"),
        ({"seed": -1}, "seed"),
        ({"unknown_key": 1}, "unknown_key"),
        ({"hermite_check": {"correlations": [1.5]}}, "hermite_check"),
        ({"diagrams": {"m": 8, "max_rows": 4}}, "diagrams"),
        ({"chaos": {"resolution": 7}}, "chaos"),
        ({"fbm": {"hurst": [1.0]}}, "fbm"),
        ({"tails": {"orders": [7]}}, "tails"),
    ],
)
def test_validation_errors_name_the_field(tmp_path: Path, payload: dict, field: str) -> None:
    path = _write_yaml(tmp_path / "bad.yaml", {"suite": "diagram-moments", **payload})
    with pytest.raises(IOConfigError, match=field):
        load_config(path)


def test_noncentral_renormalization_needs_convergent_integral() -> None:
    with pytest.raises(IOConfigError, match="k\\*alpha < nu"):
        build_config("renormalize", overrides={"model": {"alpha": 0.6}, "renormalize": {"k": 2}})
    config, _ = build_config(
        "renormalize", overrides={"model": {"alpha": 0.6}, "renormalize": {"k": 2, "regime": "central"}}
    )
    assert config.renormalize.regime == "central"


def test_renormalize_box_divisibility() -> None:
    with pytest.raises(IOConfigError, match="not divisible"):
        build_config("renormalize", overrides={"renormalize": {"N": [64, 128], "box": 200}})
    config, _ = build_config("renormalize", overrides={"renormalize": {"N": [64, 128]}})
    assert config.field_box == 128


def test_unreadable_sources(tmp_path: Path) -> None:
    with pytest.raises(IOConfigError, match="not found"):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("suite: [unclosed", encoding="utf-8")
    with pytest.raises(IOConfigError, match="cannot parse"):
        load_config(bad)
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(IOConfigError, match="mapping"):
        load_config(listing)


def test_model_section_builds_the_domain_model() -> None:
    config, _ = build_config(
        "spectral-limit", overrides={"model": {"nu": 2, "alpha": 1.2, "angular": "axis", "angular_amplitude": 0.4}}
    )
    model = config.model.to_model()
    assert model == CorrelationModel(nu=2, alpha=1.2, angular="axis", angular_amplitude=0.4)
    white, _ = build_config("spectral-limit", overrides={"model": {"kind": "white", "nu": 2}})
    assert white.model.to_model().is_white


REPO_ROOT = Path(__file__).resolve().parents[2]


@pytest.mark.parametrize("path", sorted((REPO_ROOT / "configs").glob("*.yaml")), ids=lambda p: p.stem)
@pytest.mark.parametrize("profile", [None, "quick", "full"])
def test_shipped_configs_validate(path: Path, profile: str) -> None:
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    config, merged = build_config(
        raw["suite"], config_path=path, profile=str(REPO_ROOT / "profiles" / profile) if profile else None
    )
    assert config.experiment == raw["experiment"]
    assert config.seed == raw["seed"]
    if profile:
        assert merged["profile"]["id"] == profile
