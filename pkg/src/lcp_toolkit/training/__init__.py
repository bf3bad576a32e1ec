"""Optimization, smoothness-regularized objectives and checkpoint selection."""

from .batching import EncodedBatch, EncodedExample, RunContext, collate
from .checkpoints import CheckpointSet, Snapshot
from .objectives import pgd_perturb, smart_loss, smart_loss_terms, smoothness_loss, task_loss
from .schedule import clip_gradients, clip_parameter_gradients, global_norm, lr_at, warmup_steps
from .selection import GridRun, GridSearchResult, Selection, best_epoch, grid_search, select_best
from .trainer import parse_method, predict_split, step_seed, train, train_msft, train_mtl

__all__ = [
    "CheckpointSet",
    "EncodedBatch",
    "EncodedExample",
    "GridRun",
    "GridSearchResult",
    "RunContext",
    "Selection",
    "Snapshot",
    "best_epoch",
    "clip_gradients",
    "clip_parameter_gradients",
    "collate",
    "global_norm",
    "grid_search",
    "lr_at",
    "parse_method",
    "pgd_perturb",
    "predict_split",
    "select_best",
    "smart_loss",
    "smart_loss_terms",
    "smoothness_loss",
    "step_seed",
    "task_loss",
    "train",
    "train_msft",
    "train_mtl",
    "warmup_steps",
]
