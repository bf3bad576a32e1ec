"""Encoding datasets into padded tensor batches."""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch

from ..corpus import Dataset, FrequencyTable, Normalizer, feature_value
from ..encoding import DEFAULT_MAX_LEN, PAD_ID, Vocabulary, encode_instance
from ..utils.errors import ValidationError


@dataclass(frozen=True)
class EncodedExample:
    instance_id: str
    domain: str
    ids: Tuple[int, ...]
    feat: Optional[float] = None
    gold: Optional[float] = None


@dataclass(frozen=True)
class EncodedBatch:
    """Right-padded ids with a mask that is True on real tokens."""

    ids: torch.Tensor
    pad_mask: torch.Tensor
    feats: Optional[torch.Tensor]
    gold_values: Tuple[Optional[float], ...]
    instance_ids: Tuple[str, ...]
    domains: Tuple[str, ...]
    dtype: torch.dtype = torch.float64

    def __len__(self) -> int:
        return len(self.instance_ids)

    @property
    def gold(self) -> torch.Tensor:
        """
        Gold labels as a tensor.

        Raises:
            ValidationError: If any instance in the batch is unlabeled
        """
        for instance_id, value in zip(self.instance_ids, self.gold_values):
            if value is None:
                raise ValidationError("gold", "batch contains an unlabeled instance", instance_id)
        return torch.tensor(self.gold_values, dtype=self.dtype)


def collate(examples: Sequence[EncodedExample], dtype: torch.dtype = torch.float64) -> EncodedBatch:
    if not examples:
        raise ValidationError("batch", "cannot build an empty batch", 0)
    width = max(len(example.ids) for example in examples)
    ids = torch.full((len(examples), width), PAD_ID, dtype=torch.long)
    for row, example in enumerate(examples):
        ids[row, : len(example.ids)] = torch.tensor(example.ids, dtype=torch.long)
    pad_mask = torch.zeros_like(ids, dtype=torch.bool)
    for row, example in enumerate(examples):
        pad_mask[row, : len(example.ids)] = True

    with_feat = [example.feat is not None for example in examples]
    if any(with_feat) and not all(with_feat):
        raise ValidationError("feat", "batch mixes examples with and without the feature", None)
    feats = torch.tensor([e.feat for e in examples], dtype=dtype) if all(with_feat) else None

    return EncodedBatch(
        ids=ids,
        pad_mask=pad_mask,
        feats=feats,
        gold_values=tuple(example.gold for example in examples),
        instance_ids=tuple(example.instance_id for example in examples),
        domains=tuple(example.domain for example in examples),
        dtype=dtype,
    )


@dataclass(frozen=True)
class RunContext:
    """Everything besides the model that turns instances into model inputs."""

    vocab: Vocabulary
    max_len: int = DEFAULT_MAX_LEN
    table: Optional[FrequencyTable] = None
    normalizer: Optional[Normalizer] = None
    dtype: torch.dtype = torch.float64
    eval_batch_size: int = 64

    def encode(self, dataset: Dataset, feat: bool = False) -> List[EncodedExample]:
        """
        Encode every instance of a dataset.

        Raises:
            ValidationError: If `feat` is set but no frequency table and
                normalizer are attached
        """
        if feat and (self.table is None or self.normalizer is None):
            raise ValidationError(
                "feat",
                "the frequency feature needs a frequency table and a fitted normalizer",
                None,
            )
        examples = []
        for instance in dataset:
            sequence = encode_instance(instance, self.vocab, self.max_len)
            examples.append(
                EncodedExample(
                    instance_id=instance.id,
                    domain=instance.domain.value,
                    ids=sequence.ids,
                    feat=feature_value(instance, self.table, self.normalizer) if feat else None,
                    gold=instance.gold,
                )
            )
        return examples

    def batches(
        self, examples: Sequence[EncodedExample], batch_size: Optional[int] = None
    ) -> List[EncodedBatch]:
        """Consecutive batches in the given order."""
        size = batch_size or self.eval_batch_size
        return [collate(examples[i : i + size], self.dtype) for i in range(0, len(examples), size)]
