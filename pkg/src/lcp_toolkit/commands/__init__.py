"""Command implementations behind the lcp-toolkit CLI."""

from .data import (
    BUILD_VOCAB_COMMAND_DEFINITION,
    MAKE_SYNTHETIC_COMMAND_DEFINITION,
    build_vocab_command,
    make_synthetic_command,
)
from .evaluate import (
    ANALYZE_COMMAND_DEFINITION,
    EVALUATE_COMMAND_DEFINITION,
    analyze_command,
    evaluate_command,
)
from .predict import (
    ENSEMBLE_COMMAND_DEFINITION,
    PREDICT_COMMAND_DEFINITION,
    ensemble_command,
    predict_command,
)
from .train import (
    GRID_SEARCH_COMMAND_DEFINITION,
    INIT_CONFIG_COMMAND_DEFINITION,
    TRAIN_COMMAND_DEFINITION,
    grid_search_command,
    init_config_command,
    train_command,
)

# Command name → (definition, handler), in help order.
COMMANDS = {
    definition["name"]: (definition, handler)
    for definition, handler in (
        (MAKE_SYNTHETIC_COMMAND_DEFINITION, make_synthetic_command),
        (BUILD_VOCAB_COMMAND_DEFINITION, build_vocab_command),
        (TRAIN_COMMAND_DEFINITION, train_command),
        (GRID_SEARCH_COMMAND_DEFINITION, grid_search_command),
        (PREDICT_COMMAND_DEFINITION, predict_command),
        (ENSEMBLE_COMMAND_DEFINITION, ensemble_command),
        (EVALUATE_COMMAND_DEFINITION, evaluate_command),
        (ANALYZE_COMMAND_DEFINITION, analyze_command),
        (INIT_CONFIG_COMMAND_DEFINITION, init_config_command),
    )
}

__all__ = [
    "COMMANDS",
    "analyze_command",
    "build_vocab_command",
    "ensemble_command",
    "evaluate_command",
    "grid_search_command",
    "init_config_command",
    "make_synthetic_command",
    "predict_command",
    "train_command",
]
