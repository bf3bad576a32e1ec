"""Best-epoch and best-configuration selection by dev Pearson."""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Mapping, Optional, Sequence

from ..corpus import DOMAINS, Dataset, partition_by_domain
from ..evaluation import aligned_scores, pearson
from ..utils.config import TrainingConfig
from ..utils.errors import MetricError, ValidationError
from .checkpoints import CheckpointSet, Snapshot

logger = logging.getLogger(__name__)

WHOLE_DEV = "all"


def best_epoch(trace: Sequence[Optional[float]]) -> int:
    """
    1-based index of the highest value; the earliest epoch wins ties.

    Undefined (None) entries are skipped.

    Raises:
        MetricError: If every entry is undefined
    """
    best: Optional[int] = None
    for index, value in enumerate(trace):
        if value is None:
            continue
        if best is None or value > trace[best]:  # type: ignore[operator]
            best = index
    if best is None:
        raise MetricError("pearson", "undefined for every epoch")
    return best + 1


@dataclass(frozen=True)
class Selection:
    """
    Chosen epochs of one checkpoint set.

    Keys are "all" for whole-dev selection, or the three domain names.
    """

    checkpoints: CheckpointSet
    epochs: Mapping[str, int]
    scores: Mapping[str, float]

    @property
    def per_domain(self) -> bool:
        return WHOLE_DEV not in self.epochs

    def snapshot(self, key: str = WHOLE_DEV) -> Snapshot:
        return self.checkpoints.snapshot(self.epochs[key])

    def snapshots(self) -> Dict[str, Snapshot]:
        return {key: self.snapshot(key) for key in self.epochs}


def _trace(checkpoints: CheckpointSet, dev: Dataset) -> List[Optional[float]]:
    trace: List[Optional[float]] = []
    for snapshot in checkpoints.snapshots:
        pred, gold = aligned_scores(snapshot.dev_predictions, dev)
        try:
            trace.append(pearson(pred, gold))
        except MetricError:
            trace.append(None)
    return trace


def select_best(checkpoints: CheckpointSet, dev: Dataset, per_domain: bool = False) -> Selection:
    """
    Pick the epoch with the highest dev Pearson.

    With per_domain set, each domain gets its own argmax computed only on
    that domain's dev instances.

    Raises:
        ValidationError: If the dev split is not fully labeled or no epochs ran
        MetricError: If a required partition has fewer than two instances,
            or its Pearson is undefined in every epoch
    """
    if not dev.is_labeled:
        raise ValidationError("dev", "selection needs a fully labeled dev split", len(dev))
    if not checkpoints.snapshots:
        raise ValidationError("checkpoints", "no epochs to select from", 0)

    partitions: Dict[str, Dataset] = (
        {domain.value: part for domain, part in partition_by_domain(dev).items()}
        if per_domain
        else {WHOLE_DEV: dev}
    )
    epochs: Dict[str, int] = {}
    scores: Dict[str, float] = {}
    for key, part in partitions.items():
        if len(part) < 2:
            raise MetricError(
                "pearson", f"dev partition '{key}' has {len(part)} labeled instance(s)"
            )
        trace = _trace(checkpoints, part)
        epoch = best_epoch(trace)
        epochs[key] = epoch
        scores[key] = trace[epoch - 1]  # type: ignore[assignment]

    logger.info(f"Selected epochs for [{checkpoints.task}]: {epochs}")
    return Selection(checkpoints=checkpoints, epochs=epochs, scores=scores)


@dataclass(frozen=True)
class GridRun:
    config: TrainingConfig
    checkpoints: CheckpointSet
    selection: Selection
    domain_selection: Optional[Selection] = None


@dataclass(frozen=True)
class GridSearchResult:
    """
    Every run in grid order plus the winners.

    `best` wins on whole-dev Pearson. With per-domain selection,
    `domain_best` maps each domain to the run that wins on that domain.
    """

    runs: List[GridRun]
    best: GridRun
    domain_best: Optional[Dict[str, GridRun]] = None

    @property
    def best_config(self) -> TrainingConfig:
        return self.best.config

    def routed_snapshots(self) -> Dict[str, Snapshot]:
        """Domain → snapshot of that domain's winning run and epoch."""
        if self.domain_best is None:
            raise ValidationError(
                "per_domain", "grid search ran without per-domain selection", None
            )
        return {
            domain: run.domain_selection.snapshot(domain)  # type: ignore[union-attr]
            for domain, run in self.domain_best.items()
        }


def _first_max(runs: List[GridRun], score: Callable[[GridRun], float]) -> GridRun:
    best = runs[0]
    for run in runs[1:]:
        if score(run) > score(best):
            best = run
    return best


def _domain_score(run: GridRun, key: str) -> float:
    return run.domain_selection.scores[key]  # type: ignore[union-attr]


def grid_search(
    train_fn: Callable[[TrainingConfig], CheckpointSet],
    grid: Sequence[TrainingConfig],
    dev: Dataset,
    per_domain: bool = False,
) -> GridSearchResult:
    """
    Train every configuration and keep the best by dev Pearson.

    Runs are sequential and in grid order; ties go to the earlier config.

    Raises:
        ValidationError: If the grid is empty
    """
    if not grid:
        raise ValidationError("grid", "grid search needs at least one configuration", 0)

    runs: List[GridRun] = []
    for index, cfg in enumerate(grid, start=1):
        logger.info(f"Grid run {index}/{len(grid)}: lr={cfg.learning_rate} batch={cfg.batch_size}")
        checkpoints = train_fn(cfg)
        domain_selection = None
        if per_domain:
            domain_selection = select_best(checkpoints, dev, per_domain=True)
        runs.append(
            GridRun(
                config=cfg,
                checkpoints=checkpoints,
                selection=select_best(checkpoints, dev, per_domain=False),
                domain_selection=domain_selection,
            )
        )

    best = _first_max(runs, lambda run: run.selection.scores[WHOLE_DEV])
    domain_best = None
    if per_domain:
        domain_best = {
            domain.value: _first_max(runs, partial(_domain_score, key=domain.value))
            for domain in DOMAINS
        }
    logger.info(
        f"Grid search best: lr={best.config.learning_rate} batch={best.config.batch_size} "
        f"pearson={best.selection.scores[WHOLE_DEV]:.4f}"
    )
    return GridSearchResult(runs=runs, best=best, domain_best=domain_best)
