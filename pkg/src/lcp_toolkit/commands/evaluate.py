"""Scoring commands: metric reports and plot-ready analysis exports."""

import logging
from typing import Any, Dict

from ..corpus import Dataset, Split, load_dataset
from ..evaluation import DEFAULT_BIN_WIDTH, evaluate, export_analysis, read_predictions
from ..utils.files import atomic_write_text
from ..utils.performance import performance_tracked

logger = logging.getLogger(__name__)

_SCORING_ARGUMENTS = {
    "predictions": {"type": "string", "required": True, "description": "Prediction CSV"},
    "gold": {"type": "string", "required": True, "description": "Labeled dataset TSV"},
    "subtask": {
        "type": "string",
        "enum": ["single_word", "mwe"],
        "default": "single_word",
        "description": "Subtask of the gold file",
    },
}

EVALUATE_COMMAND_DEFINITION = {
    "name": "evaluate",
    "description": "Compute Pearson, Spearman, MAE, MSE and R2 overall and per domain",
    "arguments": {
        **_SCORING_ARGUMENTS,
        "output": {"type": "string", "description": "JSON report path"},
        "tsv": {"type": "string", "description": "Single-line TSV report path"},
    },
}

ANALYZE_COMMAND_DEFINITION = {
    "name": "analyze",
    "description": "Write scatter, histogram and per-domain CSVs for plotting",
    "arguments": {
        **_SCORING_ARGUMENTS,
        "out_dir": {"type": "string", "required": True, "description": "Output directory"},
        "bin_width": {
            "type": "number",
            "default": DEFAULT_BIN_WIDTH,
            "description": "Histogram bin width over [0, 1]",
        },
    },
}


def _load_gold(arguments: Dict[str, Any]) -> Dataset:
    subtask = arguments.get("subtask", "single_word")
    return load_dataset(arguments["gold"], subtask, Split.TEST)


@performance_tracked("command.evaluate")
def evaluate_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    predictions = read_predictions(arguments["predictions"])
    gold = _load_gold(arguments)
    report = evaluate(predictions, gold)
    logger.info(f"Evaluation: {report.summary()}")

    result: Dict[str, Any] = {
        "command": "evaluate",
        "status": "success",
        "report": report.model_dump(),
    }
    if arguments.get("output"):
        output = atomic_write_text(arguments["output"], report.to_json() + "\n")
        result["output"] = str(output)
    if arguments.get("tsv"):
        tsv = atomic_write_text(arguments["tsv"], report.to_tsv_line() + "\n")
        result["tsv"] = str(tsv)
    return result


@performance_tracked("command.analyze")
def analyze_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    predictions = read_predictions(arguments["predictions"])
    gold = _load_gold(arguments)
    written = export_analysis(
        predictions,
        gold,
        arguments["out_dir"],
        bin_width=arguments.get("bin_width", DEFAULT_BIN_WIDTH),
    )
    return {
        "command": "analyze",
        "status": "success",
        "files": {name: str(path) for name, path in written.items()},
    }
