"""CompLex-style datasets, domain partitions and the log-frequency feature."""

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .utils.errors import DataError, ValidationError
from .utils.files import atomic_write_text
from .utils.validation import (
    validate_choice,
    validate_file_exists,
    validate_instance_id,
    validate_non_empty,
    validate_unit_interval,
)

logger = logging.getLogger(__name__)

# pandas reports the 1-based physical line of a ragged row.
_PARSER_LINE = re.compile(r"line (\d+)")


class Subtask(str, Enum):
    SINGLE_WORD = "single_word"
    MWE = "mwe"


class Domain(str, Enum):
    EUROPARL = "europarl"
    BIOMED = "biomed"
    BIBLE = "bible"


class Split(str, Enum):
    TRAIN = "train"
    TRIAL = "trial"
    TEST = "test"


DOMAINS: Tuple[Domain, ...] = (Domain.EUROPARL, Domain.BIOMED, Domain.BIBLE)


class Instance(BaseModel):
    """One annotated example: a target word or MWE inside a sentence."""

    model_config = ConfigDict(frozen=True)

    id: str
    subtask: Subtask
    domain: Domain
    sentence: str
    target: str
    gold: Optional[float] = None

    @field_validator("id")
    @classmethod
    def validate_id(cls, v: str) -> str:
        return validate_instance_id(v)

    @field_validator("domain", mode="before")
    @classmethod
    def validate_domain(cls, v: Union[str, Domain]) -> str:
        if isinstance(v, Domain):
            return v.value
        return validate_choice("domain", v, [d.value for d in Domain])

    @field_validator("target")
    @classmethod
    def validate_target(cls, v: str) -> str:
        return validate_non_empty("target", v).strip()

    @field_validator("gold")
    @classmethod
    def validate_gold(cls, v: Optional[float]) -> Optional[float]:
        if v is None:
            return None
        return validate_unit_interval("gold", v)

    @model_validator(mode="after")
    def validate_mwe_target(self) -> "Instance":
        if self.subtask is Subtask.MWE and len(self.target.split()) < 2:
            raise ValidationError(
                "target", "MWE targets need at least two components", self.target
            )
        return self

    @property
    def components(self) -> List[str]:
        """Whitespace-separated components of the target."""
        return self.target.split()


class Dataset(BaseModel):
    """An ordered split of instances sharing one subtask."""

    model_config = ConfigDict(frozen=True)

    split: Split
    subtask: Subtask
    instances: Tuple[Instance, ...] = ()

    @model_validator(mode="after")
    def validate_instances(self) -> "Dataset":
        seen = set()
        for instance in self.instances:
            if instance.subtask is not self.subtask:
                raise ValidationError(
                    "subtask",
                    f"instance '{instance.id}' has subtask {instance.subtask.value}, "
                    f"dataset has {self.subtask.value}",
                    instance.subtask.value,
                )
            if instance.id in seen:
                raise ValidationError("id", "duplicate instance id", instance.id)
            seen.add(instance.id)
        return self

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:  # type: ignore[override]
        return iter(self.instances)

    def __getitem__(self, index: int) -> Instance:
        return self.instances[index]

    @property
    def ids(self) -> List[str]:
        return [instance.id for instance in self.instances]

    @property
    def is_labeled(self) -> bool:
        """True when every instance carries a gold score."""
        return all(instance.gold is not None for instance in self.instances)

    def with_instances(self, instances: Iterable[Instance]) -> "Dataset":
        """Same split and subtask, different instances."""
        return Dataset(split=self.split, subtask=self.subtask, instances=tuple(instances))

    def domain_counts(self) -> Dict[str, int]:
        return {domain.value: len(part) for domain, part in partition_by_domain(self).items()}


class ColumnMap(BaseModel):
    """TSV column names; defaults follow the public CompLex release."""

    model_config = ConfigDict(frozen=True)

    id: str = "id"
    corpus: str = "corpus"
    sentence: str = "sentence"
    token: str = "token"
    complexity: str = "complexity"


def _read_tsv(path: Path, header: bool = True) -> pd.DataFrame:
    """UTF-8, tab-separated, no quoting; every cell is read as text."""
    try:
        return pd.read_csv(
            path,
            sep="\t",
            header=0 if header else None,
            quoting=csv.QUOTE_NONE,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise DataError("no columns to parse", path=str(path), row=1)
    except pd.errors.ParserError as e:
        match = _PARSER_LINE.search(str(e))
        row = int(match.group(1)) if match else None
        raise DataError(f"malformed row: {e}", path=str(path), row=row)


def load_dataset(
    path: Union[str, Path],
    subtask: Union[str, Subtask],
    split: Union[str, Split] = Split.TRAIN,
    columns: Optional[ColumnMap] = None,
) -> Dataset:
    """
    Load a CompLex-format TSV file.

    Args:
        path: Dataset file with a header row
        subtask: Subtask every row belongs to
        split: Split label recorded on the dataset
        columns: Column-name overrides for release variants

    Returns:
        Dataset: One instance per data row, in file order

    Raises:
        NotFoundError: If the file does not exist
        DataError: On unknown domains, out-of-range labels, duplicate ids or
            missing columns; the message names the offending line
    """
    path = validate_file_exists(path, "Dataset file")
    subtask = Subtask(subtask)
    split = Split(split)
    columns = columns or ColumnMap()

    if path.stat().st_size == 0:
        raise DataError("missing header row", path=str(path), row=1)
    frame = _read_tsv(path)
    required = [columns.id, columns.corpus, columns.sentence, columns.token]
    missing = [name for name in required if name not in frame.columns]
    if missing:
        raise DataError(f"missing column(s) {missing}", path=str(path), row=1)
    has_labels = columns.complexity in frame.columns

    instances: List[Instance] = []
    seen: Dict[str, int] = {}
    for offset, values in enumerate(frame.to_dict(orient="records")):
        line = offset + 2
        gold: Optional[float] = None
        if has_labels:
            raw_gold = values.get(columns.complexity)
            if not isinstance(raw_gold, str) or not raw_gold.strip():
                raise DataError("missing complexity value", path=str(path), row=line)
            try:
                gold = float(raw_gold)
            except ValueError:
                raise DataError(f"invalid complexity value '{raw_gold}'", str(path), line)
        try:
            instance = Instance(
                id=values[columns.id],
                subtask=subtask,
                domain=values[columns.corpus],
                sentence=values[columns.sentence],
                target=values[columns.token],
                gold=gold,
            )
        except ValidationError as e:
            raise DataError(e.message, path=str(path), row=line)

        if instance.id in seen:
            raise DataError(
                f"duplicate id '{instance.id}' (first seen on line {seen[instance.id]})",
                path=str(path),
                row=line,
            )
        seen[instance.id] = line
        instances.append(instance)

    dataset = Dataset(split=split, subtask=subtask, instances=tuple(instances))
    logger.info(
        f"Loaded {len(dataset)} {subtask.value} instances from {path} "
        f"({dataset.domain_counts()})"
    )
    return dataset


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset in the format load_dataset reads back."""
    columns = ColumnMap()
    labeled = any(instance.gold is not None for instance in dataset)
    if labeled and not dataset.is_labeled:
        raise ValidationError(
            "gold", "cannot write a partially labeled dataset", len(dataset)
        )
    header = [columns.id, columns.corpus, columns.sentence, columns.token]
    if labeled:
        header.append(columns.complexity)

    # Written by hand: csv writers refuse unescaped quotes under QUOTE_NONE.
    lines = ["\t".join(header)]
    for instance in dataset:
        cells = [instance.id, instance.domain.value, instance.sentence, instance.target]
        if labeled:
            cells.append(repr(instance.gold))
        lines.append("\t".join(cells))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def partition_by_domain(dataset: Dataset) -> Dict[Domain, Dataset]:
    """Split a dataset into its three domains, preserving order within each."""
    buckets: Dict[Domain, List[Instance]] = {domain: [] for domain in DOMAINS}
    for instance in dataset:
        buckets[instance.domain].append(instance)
    return {domain: dataset.with_instances(items) for domain, items in buckets.items()}


@dataclass(frozen=True)
class FrequencyTable:
    """Token counts; absent tokens count as zero."""

    counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for token, count in self.counts.items():
            if count < 0:
                raise ValidationError("count", f"negative count for '{token}'", count)
        object.__setattr__(self, "counts", MappingProxyType(dict(self.counts)))

    def count(self, token: str) -> int:
        return self.counts.get(token, 0)

    def __len__(self) -> int:
        return len(self.counts)


def load_frequency_table(path: Union[str, Path]) -> FrequencyTable:
    """
    Load a headerless token<TAB>count file.

    Tokens are lowercased at load time; case variants are summed so that
    lookups on lowercased targets see every surface form.
    """
    path = validate_file_exists(path, "Frequency table")
    if path.stat().st_size == 0:
        return FrequencyTable({})
    frame = _read_tsv(path, header=False)
    if frame.empty:
        return FrequencyTable({})
    if frame.shape[1] != 2:
        raise DataError("expected two columns: token<TAB>count", str(path), 1)

    counts: Dict[str, int] = {}
    for line, (token, raw_count) in enumerate(frame.itertuples(index=False), start=1):
        try:
            count = int(raw_count)
        except ValueError:
            raise DataError(f"invalid count '{raw_count}'", str(path), line)
        if count < 0:
            raise DataError(f"negative count for '{token}'", str(path), line)
        key = token.lower()
        counts[key] = counts.get(key, 0) + count

    logger.info(f"Loaded {len(counts)} token counts from {path}")
    return FrequencyTable(counts)


def write_frequency_table(table: FrequencyTable, path: Union[str, Path]) -> Path:
    lines = [f"{token}\t{count}\n" for token, count in table.counts.items()]
    return atomic_write_text(path, "".join(lines))


def log_frequency(target: str, table: FrequencyTable, base: Optional[float] = None) -> float:
    """
    Log of the mean component frequency, ln(1 + mean(count(c))).

    Components are lowercased before lookup. `base` switches the logarithm;
    after min-max normalization over a fixed split the base has no effect.
    """
    components = validate_non_empty("target", target).lower().split()
    mean_count = sum(table.count(c) for c in components) / len(components)
    value = math.log1p(mean_count)
    if base is not None:
        value /= math.log(base)
    return value


@dataclass(frozen=True)
class Normalizer:
    """Min-max transform fitted on training-split feature values."""

    min: float
    max: float

    def __post_init__(self) -> None:
        if self.max < self.min:
            raise ValidationError("max", "max must not be below min", self.max)

    @property
    def degenerate(self) -> bool:
        return self.max == self.min


def fit_normalizer(values: Sequence[float]) -> Normalizer:
    """Fit min/max to the extremes of `values`."""
    values = list(values)
    if not values:
        raise ValidationError("values", "cannot fit a normalizer on no values", values)
    return Normalizer(min=float(min(values)), max=float(max(values)))


def apply_normalizer(normalizer: Normalizer, value: float) -> float:
    """Map a value into [0, 1]; values outside the fitted range are clamped."""
    if normalizer.degenerate:
        return 0.0
    scaled = (value - normalizer.min) / (normalizer.max - normalizer.min)
    return min(max(scaled, 0.0), 1.0)


def fit_feature_normalizer(
    train_sets: Iterable[Dataset], table: FrequencyTable
) -> Normalizer:
    """Fit the frequency-feature normalizer on one or more training splits."""
    values = [
        log_frequency(instance.target, table)
        for dataset in train_sets
        for instance in dataset
    ]
    return fit_normalizer(values)


def feature_value(instance: Instance, table: FrequencyTable, normalizer: Normalizer) -> float:
    """Normalized log-frequency feature of an instance's target."""
    return apply_normalizer(normalizer, log_frequency(instance.target, table))
