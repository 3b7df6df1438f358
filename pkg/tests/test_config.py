#!/usr/bin/env python3

import json
import pytest
from pathlib import Path
from pydantic import ValidationError

from qar_monitor.config import (
    BoostConfig,
    BpConfig,
    Config,
    OutlierConfig,
    RunConfig,
    WarningConfig,
    derive_seed,
    load_config,
)
from qar_monitor.enums import SkillAlgorithm


def test_defaults():
    """Defaults match the documented module settings."""
    config = Config()
    assert config.outliers.radius == 0.5
    assert config.outliers.min_pts == 5
    assert config.outliers.cv_threshold == 1.0
    assert config.forest.target == "COG NORM ACCEL"
    assert config.boost.eta == 0.3
    assert config.skill.algo is SkillAlgorithm.GBDT
    assert config.warning.window_seconds == 10.0


def test_invalid_values_fall_back_with_warning():
    """Out-of-range soft settings fall back to their defaults."""
    assert OutlierConfig(radius=-1.0).radius == 0.5
    assert OutlierConfig(min_pts=-3).min_pts == 5
    assert OutlierConfig(max_passes=0).max_passes == 10
    assert WarningConfig(window_seconds=0).window_seconds == 10.0
    assert Config(log_level="chatty").log_level == "INFO"
    assert Config(log_level="debug").log_level == "DEBUG"


def test_hard_errors():
    """Learning rates and ratios outside their domain are rejected."""
    with pytest.raises(ValidationError):
        BoostConfig(eta=1.5)
    with pytest.raises(ValidationError):
        BoostConfig(reg_lambda=-0.1)
    with pytest.raises(ValidationError):
        BpConfig(beta=-0.01)
    with pytest.raises(ValidationError):
        BpConfig(train_ratio=1.0)
    assert BoostConfig(eta=0.0).eta == 0.0


def test_derive_seed_is_stable_and_module_specific():
    """The same (seed, module) pair always gives the same seed."""
    assert derive_seed(7, "forest") == derive_seed(7, "forest")
    assert derive_seed(7, "forest") != derive_seed(7, "boost")
    assert derive_seed(7, "forest") != derive_seed(8, "forest")


def test_load_config_file_overrides(tmp_path, monkeypatch):
    """A JSON override file is merged section by section over the defaults."""
    monkeypatch.delenv("QAR_SEED", raising=False)
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 11, "forest": {"n_trees": 7}}), encoding="utf-8")
    config = load_config(path)
    assert config.seed == 11
    assert config.forest.n_trees == 7
    assert config.forest.min_leaf == 2


def test_load_config_environment(monkeypatch):
    """QAR_* environment variables feed the configuration."""
    monkeypatch.setenv("QAR_SEED", "99")
    monkeypatch.setenv("QAR_VREF", "140")
    config = load_config()
    assert config.seed == 99
    assert config.warning.vref == 140.0


def test_run_config_requires_inputs(tmp_path):
    """Every subcommand except synth needs an existing input path."""
    with pytest.raises(ValidationError):
        RunConfig(subcommand="stats")
    with pytest.raises(ValidationError):
        RunConfig(subcommand="stats", inputs=[tmp_path / "missing.csv"])
    with pytest.raises(ValidationError):
        RunConfig(subcommand="launch", inputs=[tmp_path])
    assert RunConfig(subcommand="synth").inputs == []
    assert RunConfig(subcommand="monitor", inputs=[Path("-")]).inputs == [Path("-")]
