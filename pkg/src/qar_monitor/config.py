from pydantic import BaseModel, Field, ValidationInfo, field_validator, model_validator
from typing import Any, Dict, List, Optional
from pathlib import Path
import hashlib
import json
import os
import logging
import numpy as np
from dotenv import load_dotenv

from .enums import SkillAlgorithm

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("ingest", "stats", "repair", "importance", "quantify", "eda", "skill", "monitor", "simulate", "synth")

STATE_COLUMNS = ["COG NORM ACCEL", "PITCH ATT"]
CONTROL_COLUMNS = ["CAP CLM 1 POSN", "CAP WHL 1 POSN", "TRA-L", "TRA-R"]


class IngestConfig(BaseModel):
    """Flight CSV parsing settings."""
    blank_tokens: List[str] = Field(default_factory=lambda: ["", "NaN", "nan", "NA", "null"], description="Cells read as blank")
    default_sample_rate_hz: float = Field(1.0, description="Sample rate when the schema gives none")

    @field_validator('default_sample_rate_hz')
    def rate_must_be_positive(cls, v):
        if v <= 0:
            logger.warning(f"Invalid default_sample_rate_hz: {v}, using default 1.0")
            return 1.0
        return v


class OutlierConfig(BaseModel):
    """Reliability screening and DBSCAN repair settings."""
    radius: float = Field(0.5, description="DBSCAN neighborhood radius R in standardized units")
    min_pts: int = Field(5, description="Core test: more than min_pts points within R, self included")
    cv_threshold: float = Field(1.0, description="Coefficient of variation above which a variable is unreliable")
    max_passes: int = Field(10, description="Upper bound on label-and-replace passes per repaired column")

    @field_validator('radius', 'cv_threshold')
    def positive_real(cls, v, info: ValidationInfo):
        if v <= 0:
            default = 0.5 if info.field_name == 'radius' else 1.0
            logger.warning(f"{info.field_name} must be positive, using default {default}")
            return default
        return v

    @field_validator('min_pts')
    def non_negative(cls, v):
        if v < 0:
            logger.warning(f"min_pts must be non-negative, using default 5")
            return 5
        return v

    @field_validator('max_passes')
    def at_least_one_pass(cls, v):
        if v < 1:
            logger.warning(f"max_passes must be at least 1, using default 10")
            return 10
        return v


class ForestConfig(BaseModel):
    """Random-forest regression settings."""
    target: str = Field("COG NORM ACCEL", description="Target column (landing G value)")
    n_trees: int = Field(100, description="Number of trees")
    max_depth: Optional[int] = Field(None, description="Maximum depth, None for unbounded")
    min_leaf: int = Field(2, description="Minimum samples per leaf")
    mtry: Optional[int] = Field(None, description="Features drawn per split, default ceil(sqrt(p))")
    bootstrap: bool = Field(True, description="Bootstrap resampling per tree")
    train_ratio: float = Field(0.8, description="Train share of the train/test split")

    @field_validator('n_trees', 'min_leaf')
    def positive_int(cls, v, info: ValidationInfo):
        if v < 1:
            default = 100 if info.field_name == 'n_trees' else 2
            logger.warning(f"{info.field_name} must be positive, using default {default}")
            return default
        return v

    @field_validator('train_ratio')
    def ratio_in_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"train_ratio must be in (0, 1), got {v}")
        return v


class BpConfig(BaseModel):
    """BP network settings for control quantification and the classifier head."""
    hidden: int = Field(16, description="Hidden units for the regression network")
    beta: float = Field(0.01, description="Learning rate of the plain update rules")
    epochs: int = Field(200, description="Training epochs for control quantification")
    batch_size: int = Field(1, description="Samples per update, 1 follows the per-sample rules")
    init_scale: float = Field(0.5, description="Weights start uniform in (-init_scale, init_scale)")
    state_columns: List[str] = Field(default_factory=lambda: list(STATE_COLUMNS), description="Flight-state inputs")
    control_columns: List[str] = Field(default_factory=lambda: list(CONTROL_COLUMNS), description="Control outputs")
    classifier_hidden: int = Field(128, description="Hidden units of the softmax classifier")
    classifier_lr: float = Field(0.001, description="Adam step size for the classifier")
    classifier_epochs: int = Field(150, description="Classifier training epochs")
    classifier_batch_size: int = Field(16, description="Classifier mini-batch size")
    train_ratio: float = Field(0.8, description="Train share of the per-second control rows")

    @field_validator('hidden', 'epochs', 'batch_size', 'classifier_hidden', 'classifier_epochs', 'classifier_batch_size')
    def positive_int(cls, v, info: ValidationInfo):
        if v < 1:
            default = cls.model_fields[info.field_name].default
            logger.warning(f"{info.field_name} must be positive, using default {default}")
            return default
        return v

    @field_validator('beta', 'classifier_lr')
    def non_negative_rate(cls, v, info: ValidationInfo):
        if v < 0:
            raise ValueError(f"{info.field_name} must be non-negative, got {v}")
        return v

    @field_validator('train_ratio')
    def ratio_in_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"train_ratio must be in (0, 1), got {v}")
        return v


class BoostConfig(BaseModel):
    """Gradient-boosted tree settings."""
    rounds: int = Field(50, description="Boosting rounds")
    eta: float = Field(0.3, description="Learning rate")
    max_depth: int = Field(4, description="Maximum tree depth")
    reg_lambda: float = Field(1.0, description="L2 leaf regularization lambda")
    gamma: float = Field(0.0, description="Minimum split gain gamma")

    @field_validator('eta')
    def eta_in_range(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {v}")
        return v

    @field_validator('reg_lambda', 'gamma')
    def non_negative(cls, v, info: ValidationInfo):
        if v < 0:
            raise ValueError(f"{info.field_name} must be non-negative, got {v}")
        return v

    @field_validator('rounds', 'max_depth')
    def non_negative_int(cls, v, info: ValidationInfo):
        if v < 0:
            default = cls.model_fields[info.field_name].default
            logger.warning(f"{info.field_name} must be non-negative, using default {default}")
            return default
        return v


class SkillConfig(BaseModel):
    """Pilot-skill dataset and rating settings."""
    algo: SkillAlgorithm = Field(SkillAlgorithm.GBDT, description="Rating algorithm")
    label_column: str = Field("rating", description="Per-flight operation rating (A,C,F,J,M,T)")
    pilot_column: str = Field("pilot", description="Landing main-control pilot (1..4)")
    flight_column: Optional[str] = Field(None, description="Flight id column for per-flight variance features")
    irrelevant_patterns: List[str] = Field(default_factory=lambda: ["DATE", "TIME"], description="Name fragments of columns unrelated to skill")
    minority_share: float = Field(0.10, description="Drop columns whose non-mode share is below this")
    train_ratio: float = Field(0.8, description="Train share of the train/test split")

    @field_validator('minority_share', 'train_ratio')
    def share_in_range(cls, v, info: ValidationInfo):
        if not 0.0 < v < 1.0:
            raise ValueError(f"{info.field_name} must be in (0, 1), got {v}")
        return v


class EdaConfig(BaseModel):
    """Exceedance log analytics settings."""
    top: int = Field(10, description="Rows shown in ranked tables")

    @field_validator('top')
    def positive_top(cls, v):
        if v < 1:
            logger.warning(f"Invalid top: {v}, using default 10")
            return 10
        return v


class WarningConfig(BaseModel):
    """Warning engine column mapping and reference values."""
    air_ground_column: str = Field("AIR GROUND", description="Discrete, TRUE while airborne")
    pitch_column: str = Field("PITCH ATT", description="Pitch attitude")
    airspeed_column: str = Field("COMPUTED AIR SPD", description="Computed air speed")
    descent_rate_column: str = Field("DESCENT RATE", description="Descent rate, positive when descending")
    ground_speed_column: str = Field("GROUNDSPEED", description="Ground speed")
    altitude_column: str = Field("ALTITUDE", description="Pressure altitude")
    radio_altitude_column: str = Field("RADIO ALT", description="Radio altitude, preferred for bands")
    gear_column: str = Field("GEAR DOWN", description="Discrete, TRUE while gear is down")
    field_elevation: float = Field(0.0, description="Subtracted from pressure altitude when no radio altitude")
    window_seconds: float = Field(10.0, description="Half width of landing/takeoff key-point windows")
    climb_speed_scale: float = Field(1.0, description="Extra factor on the climb-speed proxy")
    vref: Optional[float] = Field(None, description="Default Vref when refs give none")
    v2: Optional[float] = Field(None, description="Default V2 when refs give none")
    fail_on_critical: bool = Field(False, description="Nonzero exit when a critical rule fires")

    @field_validator('window_seconds')
    def positive_window(cls, v):
        if v <= 0:
            logger.warning(f"Invalid window_seconds: {v}, using default 10")
            return 10.0
        return v


class Config(BaseModel):
    """Global configuration."""
    ingest: IngestConfig = Field(default_factory=IngestConfig)
    outliers: OutlierConfig = Field(default_factory=OutlierConfig)
    forest: ForestConfig = Field(default_factory=ForestConfig)
    bpnet: BpConfig = Field(default_factory=BpConfig)
    boost: BoostConfig = Field(default_factory=BoostConfig)
    skill: SkillConfig = Field(default_factory=SkillConfig)
    eda: EdaConfig = Field(default_factory=EdaConfig)
    warning: WarningConfig = Field(default_factory=WarningConfig)
    seed: int = Field(20140407, description="Global seed, fanned out per module")
    output_dir: str = Field("artifacts", description="Directory for run outputs")
    log_level: str = Field("INFO", description="Logging level")

    @field_validator('output_dir')
    def valid_directory(cls, v):
        if not v:
            logger.warning("Empty output_dir, using default")
            return "artifacts"
        return v

    @field_validator('log_level')
    def valid_level(cls, v):
        level = str(v).upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            logger.warning(f"Invalid log_level {v}, using INFO")
            return "INFO"
        return level


class RunConfig(BaseModel):
    """One CLI invocation: subcommand, paths and per-module overrides."""
    subcommand: str
    inputs: List[Path] = Field(default_factory=list)
    schema_path: Optional[Path] = None
    rules_path: Optional[Path] = None
    refs_path: Optional[Path] = None
    output_dir: Path = Path("artifacts")
    seed: int = 20140407
    column: Optional[str] = None
    all_flagged: bool = False
    event: Optional[str] = None
    flights: int = Field(8, description="Flights written by synth")
    config: Config = Field(default_factory=Config)

    @field_validator('subcommand')
    def known_subcommand(cls, v):
        if v not in SUBCOMMANDS:
            raise ValueError(f"Unknown subcommand {v!r}, expected one of {', '.join(SUBCOMMANDS)}")
        return v

    @model_validator(mode='after')
    def paths_exist(self):
        missing = [str(p) for p in [*self.inputs, self.schema_path, self.rules_path, self.refs_path]
                   if p is not None and str(p) != "-" and not Path(p).exists()]
        if missing:
            raise ValueError(f"Path(s) not found: {', '.join(missing)}")
        if self.subcommand not in ("synth",) and not self.inputs:
            raise ValueError(f"Subcommand {self.subcommand} needs at least one input path")
        return self


def derive_seed(seed: int, module: str) -> int:
    """Fan the global seed out to a module seed; stable across processes."""
    digest = hashlib.sha256(module.encode("utf-8")).digest()
    salt = int.from_bytes(digest[:4], "little")
    return int(np.random.SeedSequence([seed, salt]).generate_state(1)[0])


def _deep_update(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_update(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_file: Optional[Path] = None) -> Config:
    """Load configuration from defaults, environment variables and an optional JSON file."""
    try:
        logger.info("Loading configuration")
        load_dotenv()

        data: Dict[str, Any] = {}
        if os.getenv("QAR_SEED"):
            data["seed"] = int(os.getenv("QAR_SEED"))
        if os.getenv("QAR_OUTPUT_DIR"):
            data["output_dir"] = os.getenv("QAR_OUTPUT_DIR")
        if os.getenv("QAR_LOG_LEVEL"):
            data["log_level"] = os.getenv("QAR_LOG_LEVEL")
        if os.getenv("QAR_VREF") or os.getenv("QAR_V2"):
            data["warning"] = {}
            if os.getenv("QAR_VREF"):
                data["warning"]["vref"] = float(os.getenv("QAR_VREF"))
            if os.getenv("QAR_V2"):
                data["warning"]["v2"] = float(os.getenv("QAR_V2"))
    except Exception as e:
        logger.error(f"Error reading environment configuration: {str(e)}")
        logger.info("Ignoring environment overrides")
        data = {}

    if config_file is not None:
        with open(config_file, encoding="utf-8") as f:
            data = _deep_update(data, json.load(f))

    config = Config.model_validate(data)
    logger.info(f"Configuration loaded successfully: seed={config.seed}, output_dir={config.output_dir}")
    return config
