"""Data preparation commands: synthetic fixtures and vocabularies."""

import logging
from pathlib import Path
from typing import Any, Dict

from ..corpus import Split, Subtask, load_dataset
from ..encoding import build_vocab, save_vocab
from ..synthetic import make_synthetic, write_synthetic
from ..utils.errors import ConfigError
from ..utils.performance import performance_tracked

logger = logging.getLogger(__name__)


MAKE_SYNTHETIC_COMMAND_DEFINITION = {
    "name": "make-synthetic",
    "description": "Generate a frequency-driven synthetic corpus and frequency table",
    "arguments": {
        "seed": {"type": "integer", "default": 1, "description": "Generator seed"},
        "size": {
            "type": "integer",
            "default": 600,
            "description": "Training rows; trial and test get size // 10 each",
        },
        "subtask": {
            "type": "string",
            "enum": ["single_word", "mwe"],
            "default": "single_word",
            "description": "Single-word or two-word targets",
        },
        "out_dir": {
            "type": "string",
            "required": True,
            "description": "Directory receiving train/trial/test/frequencies TSVs",
        },
    },
}

BUILD_VOCAB_COMMAND_DEFINITION = {
    "name": "build-vocab",
    "description": "Build a vocabulary from the sentences of one or more training files",
    "arguments": {
        "train": {
            "type": "list[string]",
            "required": True,
            "description": "Training TSV file(s)",
        },
        "subtask": {
            "type": "list[string]",
            "default": ["single_word"],
            "description": "Subtask of each training file (one value applies to all)",
        },
        "min_count": {
            "type": "integer",
            "default": 1,
            "description": "Drop tokens seen fewer times",
        },
        "output": {"type": "string", "required": True, "description": "Vocabulary TSV"},
    },
}


@performance_tracked("command.make_synthetic")
def make_synthetic_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    corpus = make_synthetic(
        seed=arguments.get("seed", 1),
        size=arguments.get("size", 600),
        subtask=arguments.get("subtask", "single_word"),
    )
    written = write_synthetic(corpus, Path(arguments["out_dir"]))
    return {
        "command": "make-synthetic",
        "status": "success",
        "files": {name: str(path) for name, path in written.items()},
        "counts": {
            "train": len(corpus.train),
            "trial": len(corpus.trial),
            "test": len(corpus.test),
        },
        "train_domains": corpus.train.domain_counts(),
    }


@performance_tracked("command.build_vocab")
def build_vocab_command(arguments: Dict[str, Any]) -> Dict[str, Any]:
    paths = list(arguments["train"])
    subtasks = list(arguments.get("subtask") or ["single_word"])
    if len(subtasks) == 1:
        subtasks = subtasks * len(paths)
    if len(subtasks) != len(paths):
        raise ConfigError("give one --subtask, or one per --train file", key="subtask")
    unknown = sorted(set(subtasks) - {s.value for s in Subtask})
    if unknown:
        raise ConfigError(f"unknown subtask(s) {unknown}", key="subtask")
    datasets = [
        load_dataset(path, subtask, Split.TRAIN) for path, subtask in zip(paths, subtasks)
    ]
    vocab = build_vocab(datasets, min_count=arguments.get("min_count", 1))
    output = save_vocab(vocab, arguments["output"])
    return {
        "command": "build-vocab",
        "status": "success",
        "output": str(output),
        "size": len(vocab),
        "digest": vocab.digest(),
    }
