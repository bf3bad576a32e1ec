"""The five shared-task metrics, per-domain reports and analysis exports."""

import io
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.stats import rankdata

from .corpus import DOMAINS, Dataset, partition_by_domain
from .utils.errors import DataError, MetricError, NotFoundError, ValidationError
from .utils.files import atomic_write_text
from .utils.validation import validate_file_exists

logger = logging.getLogger(__name__)

METRIC_NAMES: Tuple[str, ...] = ("pearson", "spearman", "mae", "mse", "r2")
DEFAULT_BIN_WIDTH = 0.05


class PredictionSet(BaseModel):
    """Predicted complexity per instance id."""

    model_config = ConfigDict(frozen=True)

    scores: Dict[str, float]

    @field_validator("scores")
    @classmethod
    def validate_scores(cls, v: Dict[str, float]) -> Dict[str, float]:
        for instance_id, score in v.items():
            if not math.isfinite(score) or not 0.0 <= score <= 1.0:
                raise ValidationError(
                    "prediction", f"score for '{instance_id}' must lie in [0, 1]", score
                )
        return v

    def __len__(self) -> int:
        return len(self.scores)

    def __iter__(self) -> Iterator[str]:  # type: ignore[override]
        return iter(self.scores)

    def __getitem__(self, instance_id: str) -> float:
        return self.scores[instance_id]

    def __contains__(self, instance_id: object) -> bool:
        return instance_id in self.scores

    @property
    def ids(self) -> List[str]:
        return list(self.scores)

    def subset(self, ids: Sequence[str]) -> "PredictionSet":
        return PredictionSet(scores={i: self.scores[i] for i in ids})


def write_predictions(predictions: PredictionSet, path: Union[str, Path]) -> Path:
    """CSV with header id,prediction; scores use the shortest round-tripping repr."""
    lines = ["id,prediction"] + [f"{i},{score!r}" for i, score in predictions.scores.items()]
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_predictions(path: Union[str, Path]) -> PredictionSet:
    """
    Read an id,prediction CSV.

    Raises:
        NotFoundError: If the file is missing
        DataError: On a bad header, duplicate ids or invalid scores
    """
    path = validate_file_exists(path, "Prediction file")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if list(frame.columns) != ["id", "prediction"]:
        raise DataError("header must be 'id,prediction'", path=str(path), row=1)
    duplicated = frame["id"][frame["id"].duplicated()]
    if not duplicated.empty:
        raise DataError(f"duplicate id '{duplicated.iloc[0]}'", path=str(path))
    try:
        scores = [float(value) for value in frame["prediction"]]
        return PredictionSet(scores=dict(zip(frame["id"], scores)))
    except (ValidationError, ValueError) as e:
        raise DataError(str(e), path=str(path))


def _paired(
    pred: Sequence[float], gold: Sequence[float], metric: str, min_len: int
) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gold, dtype=np.float64)
    if p.ndim != 1 or p.shape != g.shape:
        raise ValidationError(metric, f"length mismatch: {p.shape} vs {g.shape}", None)
    if p.shape[0] < min_len:
        raise MetricError(metric, f"needs at least {min_len} values, got {p.shape[0]}")
    return p, g


def _is_constant(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


def pearson(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Sample Pearson correlation."""
    p, g = _paired(pred, gold, "pearson", 2)
    if _is_constant(p) or _is_constant(g):
        raise MetricError("pearson", "zero variance")
    dp = p - p.mean()
    dg = g - g.mean()
    denominator = math.sqrt(float(np.dot(dp, dp))) * math.sqrt(float(np.dot(dg, dg)))
    if denominator == 0.0:
        raise MetricError("pearson", "zero variance")
    return float(min(max(np.dot(dp, dg) / denominator, -1.0), 1.0))


def spearman(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Pearson correlation of average fractional ranks."""
    p, g = _paired(pred, gold, "spearman", 2)
    if _is_constant(p) or _is_constant(g):
        raise MetricError("spearman", "zero variance")
    return pearson(rankdata(p, method="average"), rankdata(g, method="average"))


def mae(pred: Sequence[float], gold: Sequence[float]) -> float:
    p, g = _paired(pred, gold, "mae", 1)
    return float(np.mean(np.abs(p - g)))


def mse(pred: Sequence[float], gold: Sequence[float]) -> float:
    p, g = _paired(pred, gold, "mse", 1)
    return float(np.mean((p - g) ** 2))


def r2(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Coefficient of determination; negative when worse than the gold mean."""
    p, g = _paired(pred, gold, "r2", 1)
    if _is_constant(g):
        raise MetricError("r2", "zero gold variance")
    residual = float(np.sum((g - p) ** 2))
    total = float(np.sum((g - g.mean()) ** 2))
    return 1.0 - residual / total


class MetricBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    pearson: float
    spearman: float
    mae: float
    mse: float
    r2: float
    count: int


def _tsv_cells(block: Optional[MetricBlock]) -> List[str]:
    if block is None:
        return ["NA"] * (len(METRIC_NAMES) + 1)
    return [str(block.count)] + [f"{getattr(block, name):.6f}" for name in METRIC_NAMES]


class EvaluationReport(MetricBlock):
    """Whole-set metrics plus one block per domain (None when undefined)."""

    per_domain: Dict[str, Optional[MetricBlock]]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2)

    def to_tsv_line(self) -> str:
        """Fixed-order single line: whole-set block, then each domain's block."""
        cells = _tsv_cells(self)
        for domain in DOMAINS:
            cells += _tsv_cells(self.per_domain.get(domain.value))
        return "\t".join(cells)

    def summary(self) -> str:
        return " ".join(f"{name}={getattr(self, name):.4f}" for name in METRIC_NAMES)


def compute_metrics(pred: Sequence[float], gold: Sequence[float]) -> MetricBlock:
    return MetricBlock(
        pearson=pearson(pred, gold),
        spearman=spearman(pred, gold),
        mae=mae(pred, gold),
        mse=mse(pred, gold),
        r2=r2(pred, gold),
        count=len(gold),
    )


def aligned_scores(predictions: PredictionSet, gold: Dataset) -> Tuple[List[float], List[float]]:
    """Predictions and gold labels of every labeled instance, in dataset order."""
    pred: List[float] = []
    labels: List[float] = []
    for instance in gold:
        if instance.gold is None:
            continue
        if instance.id not in predictions:
            raise NotFoundError("Prediction", instance.id)
        pred.append(predictions[instance.id])
        labels.append(instance.gold)
    return pred, labels


def evaluate(predictions: PredictionSet, gold: Dataset) -> EvaluationReport:
    """
    Score predictions against a labeled dataset.

    Domains with fewer than two instances, or with a constant prediction or
    gold sequence, report None instead of raising.

    Raises:
        NotFoundError: If a labeled instance has no prediction
        MetricError: If the whole-set metrics are undefined
    """
    pred, labels = aligned_scores(predictions, gold)
    overall = compute_metrics(pred, labels)

    per_domain: Dict[str, Optional[MetricBlock]] = {}
    for domain, part in partition_by_domain(gold).items():
        part_pred, part_gold = aligned_scores(predictions, part)
        try:
            per_domain[domain.value] = compute_metrics(part_pred, part_gold)
        except MetricError as e:
            logger.debug(f"No metrics for domain {domain.value}: {e.message}")
            per_domain[domain.value] = None

    return EvaluationReport(**overall.model_dump(), per_domain=per_domain)


def _safe(metric, pred: Sequence[float], gold: Sequence[float]) -> float:
    try:
        return metric(pred, gold)
    except MetricError:
        return float("nan")


def _bin_count(bin_width: float) -> int:
    bins = round(1.0 / bin_width)
    if bins < 1 or not math.isclose(bins * bin_width, 1.0, rel_tol=1e-9):
        raise ValidationError("bin_width", "bin width must divide [0, 1] evenly", bin_width)
    return bins


def histogram_edges(bin_width: float = DEFAULT_BIN_WIDTH) -> np.ndarray:
    """Bin edges k·width, rounded to 12 decimals."""
    bins = _bin_count(bin_width)
    return np.round(np.arange(bins + 1) * bin_width, 12)


def histogram_counts(
    values: Sequence[float], bin_width: float = DEFAULT_BIN_WIDTH
) -> np.ndarray:
    """
    Counts over half-open bins [k·width, (k+1)·width); the last bin also holds 1.0.

    Bin indices come from the scaled value, so a score lying exactly on an
    edge always opens the next bin.
    """
    bins = _bin_count(bin_width)
    scaled = np.round(np.asarray(values, dtype=np.float64) / bin_width, 9)
    index = np.clip(np.floor(scaled).astype(int), 0, bins - 1)
    return np.bincount(index, minlength=bins)


def export_analysis(
    predictions: PredictionSet,
    gold: Dataset,
    out_dir: Union[str, Path],
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> Dict[str, Path]:
    """
    Write plot-ready analysis tables.

    Produces scatter.csv (id, domain, prediction, gold), histogram.csv (both
    score distributions; the last bin includes 1.0) and per_domain.csv (count
    and the five metrics for each domain).
    """
    out_dir = Path(out_dir)
    labeled = [instance for instance in gold if instance.gold is not None]
    if not labeled:
        raise ValidationError("gold", "analysis needs a labeled dataset", len(gold))
    pred, labels = aligned_scores(predictions, gold)

    scatter = pd.DataFrame(
        {
            "id": [i.id for i in labeled],
            "domain": [i.domain.value for i in labeled],
            "prediction": pred,
            "gold": labels,
        }
    )

    edges = histogram_edges(bin_width)
    histogram = pd.DataFrame(
        {
            "bin_start": edges[:-1],
            "bin_end": edges[1:],
            "prediction_count": histogram_counts(pred, bin_width),
            "gold_count": histogram_counts(labels, bin_width),
        }
    )

    rows = []
    for domain, part in partition_by_domain(gold).items():
        part_pred, part_gold = aligned_scores(predictions, part)
        row: Dict[str, object] = {"domain": domain.value, "count": len(part_gold)}
        for name, metric in zip(METRIC_NAMES, (pearson, spearman, mae, mse, r2)):
            row[name] = _safe(metric, part_pred, part_gold)
        rows.append(row)
    per_domain = pd.DataFrame(rows, columns=["domain", "count", *METRIC_NAMES])

    written: Dict[str, Path] = {}
    for name, frame in (("scatter", scatter), ("histogram", histogram), ("per_domain", per_domain)):
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, na_rep="NA", lineterminator="\n")
        written[name] = atomic_write_text(out_dir / f"{name}.csv", buffer.getvalue())

    logger.info(f"Wrote analysis exports for {len(labeled)} instances to {out_dir}")
    return written

