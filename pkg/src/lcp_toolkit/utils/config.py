"""Run configuration for the lexical complexity toolkit."""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from .errors import ConfigError, NotFoundError

logger = logging.getLogger(__name__)

# Search grid for pretrained-size encoders.
TARGET_SCALE_LEARNING_RATES: Tuple[float, ...] = (8e-6, 9e-6, 1e-5)
TARGET_SCALE_BATCH_SIZES: Tuple[int, ...] = (8, 16, 32)
TOY_LEARNING_RATE = 1e-3

METHOD_TOKENS = ("standard", "feat", "adv", "msft", "mtl")
DEFAULT_OUTPUT_ROOT = "runs"


class TrainingConfig(BaseModel):
    """Optimizer, schedule and clipping settings for one training run."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    learning_rate: float = Field(
        default=TOY_LEARNING_RATE, alias="lr", description="Peak learning rate"
    )
    batch_size: int = Field(default=16, description="Mini-batch size")
    max_epochs: int = Field(default=10, description="Number of training epochs")
    warmup_fraction: float = Field(
        default=0.1, description="Fraction of steps spent warming up"
    )
    clip_norm: float = Field(default=1.0, description="Global gradient norm bound")
    seed: int = Field(default=0, description="Seed for data order and perturbations")
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-6
    weight_decay: float = 0.0

    @field_validator("learning_rate")
    @classmethod
    def validate_learning_rate(cls, v: float) -> float:
        """Validate learning rate."""
        if v <= 0:
            raise ValueError("Learning rate must be positive")
        return v

    @field_validator("batch_size")
    @classmethod
    def validate_batch_size(cls, v: int) -> int:
        """Validate batch size."""
        if v < 1:
            raise ValueError("Batch size must be at least 1")
        return v

    @field_validator("max_epochs")
    @classmethod
    def validate_max_epochs(cls, v: int) -> int:
        """Validate epoch count."""
        if v < 1:
            raise ValueError("max_epochs must be at least 1")
        return v

    @field_validator("warmup_fraction")
    @classmethod
    def validate_warmup_fraction(cls, v: float) -> float:
        """Validate warmup fraction."""
        if not 0 < v < 1:
            raise ValueError("warmup_fraction must lie strictly between 0 and 1")
        return v

    @field_validator("clip_norm")
    @classmethod
    def validate_clip_norm(cls, v: float) -> float:
        """Validate clipping bound."""
        if v <= 0:
            raise ValueError("clip_norm must be positive")
        return v


class AdversarialConfig(BaseModel):
    """Perturbation settings for smoothness-regularized training."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=1e-5, description="Radius of the inf-norm ball")
    step_size: float = Field(default=1e-3, description="Projected ascent step size")
    init_variance: float = Field(
        default=1e-5, description="Variance of the initial Gaussian perturbation"
    )
    pgd_steps: int = Field(default=1, description="Number of projected ascent steps")
    alpha: float = Field(default=1.0, description="Weight of the smoothness term")

    @field_validator("epsilon", "step_size", "init_variance")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        """Validate strictly positive settings."""
        if v <= 0:
            raise ValueError("value must be positive")
        return v

    @field_validator("pgd_steps")
    @classmethod
    def validate_pgd_steps(cls, v: int) -> int:
        """Validate ascent step count."""
        if v < 1:
            raise ValueError("pgd_steps must be at least 1")
        return v

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: float) -> float:
        """Alpha may be zero, which switches the regularizer off."""
        if v < 0:
            raise ValueError("alpha cannot be negative")
        return v


class OptimizerGrid(BaseModel):
    """Hyper-parameter grid searched in declared order (lr outer, batch inner)."""

    model_config = ConfigDict(frozen=True)

    learning_rates: List[float] = Field(
        default_factory=lambda: list(TARGET_SCALE_LEARNING_RATES)
    )
    batch_sizes: List[int] = Field(
        default_factory=lambda: list(TARGET_SCALE_BATCH_SIZES)
    )

    @field_validator("learning_rates", "batch_sizes")
    @classmethod
    def validate_non_empty(cls, v: List[Any]) -> List[Any]:
        """Validate that a grid axis is non-empty."""
        if not v:
            raise ValueError("grid axes cannot be empty")
        return v

    def configs(self, base: TrainingConfig) -> List[TrainingConfig]:
        """Expand the grid into concrete training configs."""
        return [
            TrainingConfig(**{**base.model_dump(), "learning_rate": lr, "batch_size": batch})
            for lr in self.learning_rates
            for batch in self.batch_sizes
        ]


class DataPaths(BaseModel):
    """Input files of a run."""

    train: Optional[str] = None
    dev: Optional[str] = None
    test: Optional[str] = None
    stage1_train: Optional[str] = None
    stage1_dev: Optional[str] = None
    frequencies: Optional[str] = None


class RunConfig(BaseModel):
    """Complete, merged configuration of a training run."""

    subtask: str = "single_word"
    stage1_subtask: Optional[str] = None
    method: str = "standard"
    encoder_preset: str = "toy"
    feat: bool = False
    adv: AdversarialConfig = Field(default_factory=AdversarialConfig)
    optimizer: TrainingConfig = Field(default_factory=TrainingConfig)
    seed: int = 0
    per_domain_selection: bool = False
    max_len: int = 512
    min_count: int = 1
    dropout: Optional[float] = None
    dtype: str = "float64"
    output_dir: str = DEFAULT_OUTPUT_ROOT
    data: DataPaths = Field(default_factory=DataPaths)
    grid: Optional[OptimizerGrid] = None

    @field_validator("subtask", "stage1_subtask")
    @classmethod
    def validate_subtask(cls, v: Optional[str]) -> Optional[str]:
        """Validate subtask name."""
        if v is not None and v not in ("single_word", "mwe"):
            raise ValueError("subtask must be 'single_word' or 'mwe'")
        return v

    @field_validator("method")
    @classmethod
    def validate_method(cls, v: str) -> str:
        """Validate a '+'-joined method combination."""
        tokens = [token.strip().lower() for token in v.split("+") if token.strip()]
        if not tokens:
            raise ValueError("method cannot be empty")
        unknown = [token for token in tokens if token not in METHOD_TOKENS]
        if unknown:
            raise ValueError(
                f"unknown method(s) {unknown}; expected any of {list(METHOD_TOKENS)}"
            )
        if "msft" in tokens and "mtl" in tokens:
            raise ValueError("msft and mtl cannot be combined")
        return "+".join(tokens)

    @field_validator("max_len")
    @classmethod
    def validate_max_len(cls, v: int) -> int:
        """Room for the start marker, two separators and one token per segment."""
        if v < 5:
            raise ValueError("max_len must be at least 5")
        return v

    @field_validator("dtype")
    @classmethod
    def validate_dtype(cls, v: str) -> str:
        """Validate parameter precision."""
        if v not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")
        return v

    @model_validator(mode="after")
    def validate_stage_data(self) -> "RunConfig":
        """Multi-dataset methods need the auxiliary (stage-1) splits."""
        methods = self.methods
        if ("msft" in methods or "mtl" in methods) and not (
            self.data.stage1_train and self.data.stage1_dev
        ):
            raise ValueError(
                "msft/mtl need data.stage1_train and data.stage1_dev"
            )
        if self.use_feat and self.data.frequencies is None:
            raise ValueError("feature-enriched runs need data.frequencies")
        return self

    @property
    def methods(self) -> FrozenSet[str]:
        """Method tokens of this run."""
        return frozenset(self.method.split("+"))

    @property
    def use_feat(self) -> bool:
        """Whether the frequency feature is concatenated before the head."""
        return self.feat or "feat" in self.methods

    @property
    def auxiliary_subtask(self) -> str:
        """Subtask of the stage-1 data; defaults to the other subtask."""
        if self.stage1_subtask is not None:
            return self.stage1_subtask
        return "mwe" if self.subtask == "single_word" else "single_word"

    def training_config(self) -> TrainingConfig:
        """Optimizer settings with the run seed applied."""
        return self.optimizer.model_copy(update={"seed": self.seed})


def _deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge `update` into a copy of `base`."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _expand_dotted(overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn {'optimizer.lr': 1e-3} into {'optimizer': {'lr': 1e-3}}."""
    nested: Dict[str, Any] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        cursor = nested
        parts = key.split(".")
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
        cursor[parts[-1]] = value
    return nested


def load_config_from_file(config_path: Path) -> Dict[str, Any]:
    """
    Load a run configuration from a JSON file.

    Raises:
        NotFoundError: If the file does not exist
        ConfigError: If the file is not valid JSON
    """
    if not config_path.exists():
        raise NotFoundError("Config file", str(config_path))

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            config_data = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise ConfigError(f"Failed to load config from {config_path}: {e}")

    if not isinstance(config_data, dict):
        raise ConfigError(f"Config file {config_path} must hold a JSON object")
    logger.info(f"Loaded configuration from {config_path}")
    return config_data


def get_run_config(
    config_file: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Build the effective run configuration from multiple sources.

    Priority order:
    1. Direct overrides (CLI flags, dotted keys allowed)
    2. Environment variables (LCP_OUTPUT_ROOT, LCP_SEED)
    3. Configuration file
    4. Default values

    Args:
        config_file: Path to a JSON run config
        overrides: Flag values; None entries are ignored

    Returns:
        RunConfig: Validated configuration object

    Raises:
        ConfigError: If the merged configuration is invalid
    """
    config_data: Dict[str, Any] = {}

    if config_file:
        config_data = _deep_merge(config_data, load_config_from_file(Path(config_file)))

    env_config = {
        "output_dir": os.getenv("LCP_OUTPUT_ROOT"),
        "seed": os.getenv("LCP_SEED"),
    }
    env_config = {k: v for k, v in env_config.items() if v is not None}
    config_data = _deep_merge(config_data, env_config)

    if overrides:
        config_data = _deep_merge(config_data, _expand_dotted(overrides))

    try:
        return RunConfig(**config_data)
    except (PydanticValidationError, ValueError, TypeError) as e:
        raise ConfigError(f"Invalid configuration: {e}")


def create_example_config(path: Path) -> Path:
    """Write a starter run configuration."""
    path.parent.mkdir(parents=True, exist_ok=True)

    example_config = {
        "subtask": "single_word",
        "method": "adv",
        "encoder_preset": "toy",
        "feat": False,
        "adv": AdversarialConfig().model_dump(),
        "optimizer": TrainingConfig().model_dump(by_alias=True),
        "seed": 1,
        "per_domain_selection": False,
        "data": {
            "train": "data/train.tsv",
            "dev": "data/trial.tsv",
            "frequencies": "data/frequencies.tsv",
        },
    }

    with open(path, "w", encoding="utf-8") as f:
        json.dump(example_config, f, indent=2)

    logger.info(f"Created example configuration file at {path}")
    return path
