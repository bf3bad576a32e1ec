"""Prediction commands: one checkpoint bundle, or an averaged ensemble."""

import logging
from typing import Any, Dict

from ..corpus import Dataset, Split, load_dataset
from ..ensemble import (
    EnsembleMember,
    EnsembleSpec,
    load_ensemble_spec,
    predict_ensemble,
)
from ..evaluation import write_predictions
from ..inference import predict_with_bundle
from ..persistence import load_bundle
from ..utils.errors import ConfigError
from ..utils.performance import performance_tracked

logger = logging.getLogger(__name__)


PREDICT_COMMAND_DEFINITION = {
    "name": "predict",
    "description": "Predict complexity scores with a checkpoint bundle",
    "arguments": {
        "checkpoint": {"type": "string", "required": True, "description": "Bundle directory"},
        "dataset": {"type": "string", "required": True, "description": "Dataset TSV"},
        "subtask": {
            "type": "string",
            "enum": ["single_word", "mwe"],
            "default": "single_word",
            "description": "Subtask of the dataset",
        },
        "output": {"type": "string", "required": True, "description": "Prediction CSV"},
    },
}

ENSEMBLE_COMMAND_DEFINITION = {
    "name": "ensemble",
    "description": "Average the outputs of several models or prediction files",
    "arguments": {
        "spec": {"type": "string", "description": "JSON ensemble spec"},
        "predictions": {
            "type": "list[string]",
            "description": "Prediction CSVs to average (instead of --spec)",
        },
        "dataset": {"type": "string", "required": True, "description": "Dataset TSV"},
        "subtask": {
            "type": "string",
            "enum": ["single_word", "mwe"],
            "default": "single_word",
            "description": "Subtask of the dataset",
        },
        "output": {"type": "string", "required": True, "description": "Prediction CSV"},
    },
}


def _load_dataset(arguments: Dict[str, Any]) -> Dataset:
    subtask = arguments.get("subtask", "single_word")
    return load_dataset(arguments["dataset"], subtask, Split.TEST)


@performance_tracked("command.predict")
def predict_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    bundle = load_bundle(arguments["checkpoint"])
    dataset = _load_dataset(arguments)
    predictions = predict_with_bundle(bundle, dataset)
    output = write_predictions(predictions, arguments["output"])
    return {
        "command": "predict",
        "status": "success",
        "output": str(output),
        "count": len(predictions),
        "routed": bundle.routed,
    }


@performance_tracked("command.ensemble")
def ensemble_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    if bool(arguments.get("spec")) == bool(arguments.get("predictions")):
        raise ConfigError("give exactly one of --spec or --predictions", key="spec")
    if arguments.get("spec"):
        spec = load_ensemble_spec(arguments["spec"])
    else:
        spec = EnsembleSpec(
            members=[EnsembleMember(predictions=path) for path in arguments["predictions"]]
        )
    dataset = _load_dataset(arguments)
    predictions = predict_ensemble(spec, dataset)
    output = write_predictions(predictions, arguments["output"])
    return {
        "command": "ensemble",
        "status": "success",
        "output": str(output),
        "members": [member.reference for member in spec.members],
        "count": len(predictions),
    }
