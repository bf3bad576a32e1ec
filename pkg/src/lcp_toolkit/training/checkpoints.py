"""Per-epoch snapshots of a training run."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import torch

from ..evaluation import EvaluationReport, PredictionSet
from ..persistence import parameter_digest
from ..utils.config import TrainingConfig
from ..utils.errors import NotFoundError


@dataclass(frozen=True)
class Snapshot:
    """Frozen parameters and dev results at the end of one epoch (1-based)."""

    epoch: int
    state: Dict[str, torch.Tensor]
    train_loss: float
    dev_predictions: PredictionSet
    dev_report: Optional[EvaluationReport] = None

    @property
    def digest(self) -> str:
        return parameter_digest(self.state)

    @property
    def dev_pearson(self) -> Optional[float]:
        return None if self.dev_report is None else self.dev_report.pearson


@dataclass
class CheckpointSet:
    """
    One snapshot per completed epoch of one task.

    For multi-step runs `stage1` holds the first stage's checkpoints and
    `stage1_epoch` the epoch that seeded the second stage.
    """

    task: str
    config: TrainingConfig
    initial_digest: str
    snapshots: List[Snapshot] = field(default_factory=list)
    stage1: Optional["CheckpointSet"] = None
    stage1_epoch: Optional[int] = None

    def __len__(self) -> int:
        return len(self.snapshots)

    def snapshot(self, epoch: int) -> Snapshot:
        if not 1 <= epoch <= len(self.snapshots):
            raise NotFoundError("Epoch", str(epoch))
        return self.snapshots[epoch - 1]

    @property
    def dev_pearson_trace(self) -> List[Optional[float]]:
        return [snapshot.dev_pearson for snapshot in self.snapshots]

    @property
    def train_loss_trace(self) -> List[float]:
        return [snapshot.train_loss for snapshot in self.snapshots]

    def epoch_log(self) -> List[Dict[str, object]]:
        """Per-epoch records for the run manifest."""
        return [
            {
                "task": self.task,
                "epoch": snapshot.epoch,
                "train_loss": snapshot.train_loss,
                "dev": None if snapshot.dev_report is None else snapshot.dev_report.model_dump(),
                "digest": snapshot.digest,
            }
            for snapshot in self.snapshots
        ]
