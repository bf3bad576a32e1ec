"""Tokenization, vocabulary and the input templates of both subtasks."""

import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import pandas as pd

from .corpus import Dataset, Instance, Subtask
from .utils.errors import DataError, ValidationError
from .utils.files import atomic_write_text
from .utils.validation import validate_file_exists

logger = logging.getLogger(__name__)

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
START_TOKEN = "[START]"
SEP_TOKEN = "[SEP]"
RESERVED_TOKENS: Tuple[str, ...] = (PAD_TOKEN, UNK_TOKEN, START_TOKEN, SEP_TOKEN)

PAD_ID, UNK_ID, START_ID, SEP_ID = 0, 1, 2, 3
DEFAULT_MAX_LEN = 512

# Words, or single punctuation marks.
TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> List[str]:
    """Lowercase and split on whitespace and punctuation boundaries."""
    return TOKEN_PATTERN.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Injective token → id mapping with reserved ids 0-3."""

    token_to_id: Mapping[str, int]

    def __post_init__(self) -> None:
        for token, expected in zip(RESERVED_TOKENS, (PAD_ID, UNK_ID, START_ID, SEP_ID)):
            if self.token_to_id.get(token) != expected:
                raise ValidationError("vocabulary", f"{token} must map to id {expected}", token)
        ids = list(self.token_to_id.values())
        if len(set(ids)) != len(ids):
            raise ValidationError("vocabulary", "ids must be unique", None)
        if sorted(ids) != list(range(len(ids))):
            raise ValidationError("vocabulary", "ids must be contiguous from 0", None)
        object.__setattr__(self, "token_to_id", MappingProxyType(dict(self.token_to_id)))

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: object) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def ids_of(self, tokens: Iterable[str]) -> List[int]:
        return [self.id_of(token) for token in tokens]

    @property
    def content_tokens(self) -> List[str]:
        return [t for t in self.token_to_id if t not in RESERVED_TOKENS]

    def to_tsv(self) -> str:
        ordered = sorted(self.token_to_id.items(), key=lambda item: item[1])
        return "".join(f"{token}\t{index}\n" for token, index in ordered)

    def digest(self) -> str:
        """SHA-256 of the serialized vocabulary; checkpoints reference it."""
        return hashlib.sha256(self.to_tsv().encode("utf-8")).hexdigest()


def build_vocab(
    train: Union[Dataset, Sequence[Dataset]], min_count: int = 1
) -> Vocabulary:
    """
    Build a vocabulary from the sentences of one or more training splits.

    Content tokens are ordered by descending count, then alphabetically, so
    the result is deterministic for a given input.

    Raises:
        ValidationError: If there are no sentences or min_count < 1
    """
    datasets = [train] if isinstance(train, Dataset) else list(train)
    if min_count < 1:
        raise ValidationError("min_count", "min_count must be at least 1", min_count)

    counts: Counter = Counter()
    sentences = 0
    for dataset in datasets:
        for instance in dataset:
            counts.update(tokenize(instance.sentence))
            sentences += 1
    if sentences == 0:
        raise ValidationError("train", "cannot build a vocabulary from no sentences", 0)

    kept = sorted(
        (
            token
            for token, count in counts.items()
            if count >= min_count and token not in RESERVED_TOKENS
        ),
        key=lambda token: (-counts[token], token),
    )
    mapping: Dict[str, int] = {token: index for index, token in enumerate(RESERVED_TOKENS)}
    for token in kept:
        mapping[token] = len(mapping)

    logger.info(f"Built vocabulary: {len(kept)} content tokens (min_count={min_count})")
    return Vocabulary(mapping)


def save_vocab(vocab: Vocabulary, path: Union[str, Path]) -> Path:
    return atomic_write_text(path, vocab.to_tsv())


def load_vocab(path: Union[str, Path]) -> Vocabulary:
    """Read a token<TAB>id vocabulary file."""
    path = validate_file_exists(path, "Vocabulary")
    # Tokens are punctuation-heavy; disable every quoting and NA rule.
    frame = pd.read_csv(
        path,
        sep="\t",
        header=None,
        quoting=3,
        dtype=str,
        keep_default_na=False,
        na_filter=False,
        encoding="utf-8",
    )
    mapping: Dict[str, int] = {}
    for line, (token, raw_id) in enumerate(frame.itertuples(index=False), start=1):
        if token in mapping:
            raise DataError(f"duplicate token '{token}'", str(path), line)
        mapping[token] = int(raw_id)
    try:
        return Vocabulary(mapping)
    except ValidationError as e:
        raise DataError(e.message, path=str(path))


@dataclass(frozen=True)
class TokenSequence:
    """Encoded model input: [START] ... [SEP] (... [SEP])."""

    ids: Tuple[int, ...]
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self) -> None:
        if not self.ids or self.ids[0] != START_ID:
            raise ValidationError("ids", "sequence must begin with the start marker", self.ids[:1])
        if SEP_ID not in self.ids:
            raise ValidationError("ids", "sequence must contain a separator", None)
        if len(self.ids) > self.max_len:
            raise ValidationError("ids", f"sequence longer than {self.max_len}", len(self.ids))

    def __len__(self) -> int:
        return len(self.ids)


def encode_single_word(
    instance: Instance, vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN
) -> TokenSequence:
    """
    [START] sentence [SEP] target [SEP]; only the sentence is ever truncated.

    Raises:
        ValidationError: If the target segment alone does not fit in max_len
    """
    sentence = vocab.ids_of(tokenize(instance.sentence))
    target = vocab.ids_of(tokenize(instance.target))
    budget = max_len - 3 - len(target)
    if budget < 0:
        raise ValidationError(
            "target", f"target segment does not fit in {max_len} tokens", instance.id
        )
    ids = [START_ID] + sentence[:budget] + [SEP_ID] + target + [SEP_ID]
    return TokenSequence(tuple(ids), max_len)


def encode_mwe(
    instance: Instance, vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN
) -> TokenSequence:
    """[START] target [SEP]; the sentence is left out for multiword targets."""
    target = vocab.ids_of(tokenize(instance.target))
    if len(target) + 2 > max_len:
        raise ValidationError(
            "target", f"target segment does not fit in {max_len} tokens", instance.id
        )
    return TokenSequence(tuple([START_ID] + target + [SEP_ID]), max_len)


def encode_instance(
    instance: Instance, vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN
) -> TokenSequence:
    if instance.subtask is Subtask.MWE:
        return encode_mwe(instance, vocab, max_len)
    return encode_single_word(instance, vocab, max_len)


def decode(sequence: TokenSequence, vocab: Vocabulary) -> List[str]:
    """Token strings of an encoded sequence, for logs and tests."""
    id_to_token = {index: token for token, index in vocab.token_to_id.items()}
    return [id_to_token[i] for i in sequence.ids]
