"""Training commands: a single configured run and a hyper-parameter grid."""

import logging
from pathlib import Path
from typing import Any, Dict

from ..pipeline import run_grid_search, run_training
from ..utils.config import (
    METHOD_TOKENS,
    OptimizerGrid,
    RunConfig,
    create_example_config,
    get_run_config,
)

logger = logging.getLogger(__name__)

# Flag name → dotted run-config key.
CONFIG_OVERRIDES = {
    "subtask": "subtask",
    "stage1_subtask": "stage1_subtask",
    "method": "method",
    "encoder_preset": "encoder_preset",
    "feat": "feat",
    "seed": "seed",
    "per_domain": "per_domain_selection",
    "max_len": "max_len",
    "dtype": "dtype",
    "output_dir": "output_dir",
    "train": "data.train",
    "dev": "data.dev",
    "test": "data.test",
    "stage1_train": "data.stage1_train",
    "stage1_dev": "data.stage1_dev",
    "frequencies": "data.frequencies",
    "lr": "optimizer.lr",
    "batch_size": "optimizer.batch_size",
    "max_epochs": "optimizer.max_epochs",
    "learning_rates": "grid.learning_rates",
    "batch_sizes": "grid.batch_sizes",
}

_RUN_ARGUMENTS = {
    "config": {"type": "string", "description": "JSON run configuration"},
    "subtask": {"type": "string", "enum": ["single_word", "mwe"], "description": "Target subtask"},
    "stage1_subtask": {
        "type": "string",
        "enum": ["single_word", "mwe"],
        "description": "Subtask of the stage-1 data (default: the other subtask)",
    },
    "method": {
        "type": "string",
        "description": f"'+'-joined subset of {', '.join(METHOD_TOKENS)}",
    },
    "encoder_preset": {"type": "string", "description": "Encoder preset name"},
    "feat": {"type": "boolean", "description": "Concatenate the frequency feature"},
    "seed": {"type": "integer", "description": "Run seed"},
    "per_domain": {"type": "boolean", "description": "Select per-domain checkpoints"},
    "max_len": {"type": "integer", "description": "Encoding length limit"},
    "dtype": {"type": "string", "enum": ["float32", "float64"], "description": "Precision"},
    "output_dir": {"type": "string", "description": "Output root (env: LCP_OUTPUT_ROOT)"},
    "run_dir": {"type": "string", "description": "Exact run directory"},
    "train": {"type": "string", "description": "Training TSV"},
    "dev": {"type": "string", "description": "Dev (trial) TSV"},
    "test": {"type": "string", "description": "Test TSV"},
    "stage1_train": {"type": "string", "description": "Stage-1 training TSV"},
    "stage1_dev": {"type": "string", "description": "Stage-1 dev TSV"},
    "frequencies": {"type": "string", "description": "token<TAB>count table"},
    "lr": {"type": "number", "description": "Peak learning rate"},
    "batch_size": {"type": "integer", "description": "Mini-batch size"},
    "max_epochs": {"type": "integer", "description": "Training epochs"},
}

TRAIN_COMMAND_DEFINITION = {
    "name": "train",
    "description": "Train one configured model, select its best epoch(s) and save a bundle",
    "arguments": dict(_RUN_ARGUMENTS),
}

GRID_SEARCH_COMMAND_DEFINITION = {
    "name": "grid-search",
    "description": "Train every learning-rate × batch-size pair and keep the best",
    "arguments": {
        **_RUN_ARGUMENTS,
        "learning_rates": {"type": "list[number]", "description": "Learning-rate axis"},
        "batch_sizes": {"type": "list[integer]", "description": "Batch-size axis"},
    },
}


def config_from_arguments(arguments: Dict[str, Any]) -> RunConfig:
    """Merge flags over the config file, environment and defaults."""
    overrides = {
        key: arguments.get(flag)
        for flag, key in CONFIG_OVERRIDES.items()
        if arguments.get(flag) is not None
    }
    return get_run_config(arguments.get("config"), overrides)


def train_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    cfg = config_from_arguments(arguments)
    run_dir = Path(arguments["run_dir"]) if arguments.get("run_dir") else None
    logger.info(f"Starting training run: method={cfg.method} preset={cfg.encoder_preset}")
    summary = run_training(cfg, run_dir)
    return {"command": "train", "status": "success", **summary}


def grid_search_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    cfg = config_from_arguments(arguments)
    if cfg.grid is None:
        cfg = cfg.model_copy(update={"grid": OptimizerGrid()})
    run_dir = Path(arguments["run_dir"]) if arguments.get("run_dir") else None
    summary = run_grid_search(cfg, run_dir)
    return {"command": "grid-search", "status": "success", **summary}


INIT_CONFIG_COMMAND_DEFINITION = {
    "name": "init-config",
    "description": "Write a starter run configuration",
    "arguments": {
        "output": {"type": "string", "required": True, "description": "Config JSON path"},
    },
}


def init_config_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    path = create_example_config(Path(arguments["output"]))
    return {"command": "init-config", "status": "success", "output": str(path)}
