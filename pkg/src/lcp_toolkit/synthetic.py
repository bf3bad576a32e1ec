"""
Desk-scale synthetic corpus whose labels are driven by target frequency.

Gold complexity is one minus the normalized log-frequency of the target,
plus Gaussian noise, so a model that sees the frequency feature should
beat one that must infer it from token identity.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .corpus import (
    DOMAINS,
    Dataset,
    FrequencyTable,
    Instance,
    Split,
    Subtask,
    write_dataset,
    write_frequency_table,
)
from .utils.errors import ValidationError

logger = logging.getLogger(__name__)

MIN_SIZE = 10
LEXICON_SIZE = 120
NOISE_STD = 0.05
# Counts are log-uniform between these powers of ten.
LOG10_COUNT_RANGE = (0.5, 6.0)

SYLLABLES = (
    "ba", "ke", "lo", "mi", "nu", "ra", "si", "to", "ve", "zu",
    "dra", "fel", "gor", "hin", "jas", "kum", "lep", "mor", "nix", "pral",
)
FILLER_WORDS = (
    "the", "a", "of", "and", "in", "to", "was", "it", "that", "with",
    "for", "on", "as", "by", "this", "from", "they", "we", "all", "there",
)
FILLER_COUNT = 5_000_000


@dataclass(frozen=True)
class SyntheticCorpus:
    train: Dataset
    trial: Dataset
    test: Dataset
    table: FrequencyTable


def _lexicon(rng: np.random.Generator) -> List[str]:
    words: List[str] = []
    seen = set(FILLER_WORDS)
    while len(words) < LEXICON_SIZE:
        parts = rng.choice(len(SYLLABLES), size=int(rng.integers(2, 4)))
        word = "".join(SYLLABLES[p] for p in parts)
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def _complexity(count: float, lo: float, hi: float, noise: float) -> float:
    normalized = (math.log1p(count) - lo) / (hi - lo)
    return round(min(max(1.0 - normalized + noise, 0.0), 1.0), 4)


def make_synthetic(
    seed: int, size: int, subtask: Union[str, Subtask] = Subtask.SINGLE_WORD
) -> SyntheticCorpus:
    """
    Generate train (size rows), trial and test (size // 10 rows each).

    Domains are assigned round-robin, so train holds size / 3 instances per
    domain when size is a multiple of three. MWE corpora use two-word targets
    whose frequency is the mean of their components' counts.

    Raises:
        ValidationError: If size < 10
    """
    if size < MIN_SIZE:
        raise ValidationError("size", f"synthetic corpora need at least {MIN_SIZE} instances", size)
    subtask = Subtask(subtask)
    rng = np.random.default_rng(seed)

    lexicon = _lexicon(rng)
    exponents = rng.uniform(*LOG10_COUNT_RANGE, size=len(lexicon))
    counts: Dict[str, int] = {word: int(10 ** e) for word, e in zip(lexicon, exponents)}
    log_counts = [math.log1p(c) for c in counts.values()]
    lo, hi = min(log_counts), max(log_counts)

    def build(split: Split, rows: int) -> Dataset:
        instances = []
        for index in range(rows):
            width = 2 if subtask is Subtask.MWE else 1
            picks = [lexicon[int(i)] for i in rng.choice(len(lexicon), size=width, replace=False)]
            target = " ".join(picks)
            mean_count = sum(counts[w] for w in picks) / width
            filler_ids = rng.integers(0, len(FILLER_WORDS), size=int(rng.integers(5, 11)))
            filler = [FILLER_WORDS[int(i)] for i in filler_ids]
            position = int(rng.integers(0, len(filler) + 1))
            words = filler[:position] + picks + filler[position:]
            instances.append(
                Instance(
                    id=f"syn-{split.value}-{index + 1:05d}",
                    subtask=subtask,
                    domain=DOMAINS[index % len(DOMAINS)],
                    sentence=" ".join(words).capitalize() + ".",
                    target=target,
                    gold=_complexity(mean_count, lo, hi, float(rng.normal(0.0, NOISE_STD))),
                )
            )
        return Dataset(split=split, subtask=subtask, instances=tuple(instances))

    train = build(Split.TRAIN, size)
    trial = build(Split.TRIAL, size // 10)
    test = build(Split.TEST, size // 10)
    table_counts = {word: FILLER_COUNT for word in FILLER_WORDS}
    table_counts.update(counts)
    return SyntheticCorpus(train=train, trial=trial, test=test, table=FrequencyTable(table_counts))


def write_synthetic(corpus: SyntheticCorpus, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write train.tsv, trial.tsv, test.tsv and frequencies.tsv."""
    out_dir = Path(out_dir)
    written = {
        "train": write_dataset(corpus.train, out_dir / "train.tsv"),
        "trial": write_dataset(corpus.trial, out_dir / "trial.tsv"),
        "test": write_dataset(corpus.test, out_dir / "test.tsv"),
        "frequencies": write_frequency_table(corpus.table, out_dir / "frequencies.tsv"),
    }
    logger.info(
        f"Wrote synthetic {corpus.train.subtask.value} corpus to {out_dir} "
        f"({len(corpus.train)}/{len(corpus.trial)}/{len(corpus.test)})"
    )
    return written
