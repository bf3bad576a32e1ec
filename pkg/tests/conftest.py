"""Shared fixtures for the lexical complexity toolkit tests."""

import sys
from pathlib import Path
from typing import Optional

# Add src directory to Python path
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

import pytest
import torch

from lcp_toolkit.corpus import (
    Dataset,
    Instance,
    Split,
    Subtask,
    fit_feature_normalizer,
)
from lcp_toolkit.encoding import build_vocab
from lcp_toolkit.model import init_model, preset_config
from lcp_toolkit.persistence import CheckpointMeta, write_bundle
from lcp_toolkit.synthetic import make_synthetic
from lcp_toolkit.training import RunContext

MAX_LEN = 64


def make_instance(
    instance_id: str,
    domain: str = "europarl",
    gold: Optional[float] = 0.5,
    sentence: str = "The cat sat on the mat.",
    target: str = "cat",
    subtask: str = "single_word",
) -> Instance:
    return Instance(
        id=instance_id,
        subtask=subtask,
        domain=domain,
        sentence=sentence,
        target=target,
        gold=gold,
    )


def make_dataset(instances, split: Split = Split.TEST, subtask: str = "single_word") -> Dataset:
    return Dataset(split=split, subtask=Subtask(subtask), instances=tuple(instances))


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Twelve labeled instances, four per domain, with distinct scores."""
    domains = ["europarl", "biomed", "bible"]
    instances = [
        make_instance(
            f"t{i:02d}",
            domain=domains[i % 3],
            gold=round(0.05 + 0.07 * i, 4),
            sentence=f"Sentence number {i} talks about word{i}.",
            target=f"word{i}",
        )
        for i in range(12)
    ]
    return make_dataset(instances)


@pytest.fixture(scope="session")
def synthetic_corpus():
    """Small frequency-driven corpus: 90 train, 9 trial, 9 test instances."""
    return make_synthetic(seed=1, size=90)


@pytest.fixture(scope="session")
def synthetic_mwe_corpus():
    return make_synthetic(seed=2, size=60, subtask="mwe")


@pytest.fixture
def synthetic_vocab(synthetic_corpus):
    return build_vocab(synthetic_corpus.train)


@pytest.fixture
def run_context(synthetic_corpus, synthetic_vocab) -> RunContext:
    return RunContext(vocab=synthetic_vocab, max_len=MAX_LEN)


@pytest.fixture
def feat_context(synthetic_corpus, synthetic_vocab) -> RunContext:
    normalizer = fit_feature_normalizer([synthetic_corpus.train], synthetic_corpus.table)
    return RunContext(
        vocab=synthetic_vocab,
        max_len=MAX_LEN,
        table=synthetic_corpus.table,
        normalizer=normalizer,
    )


@pytest.fixture
def toy_config(synthetic_vocab):
    return preset_config("toy", vocab_size=len(synthetic_vocab), max_len=MAX_LEN)


@pytest.fixture
def debug_config(synthetic_vocab):
    return preset_config("debug", vocab_size=len(synthetic_vocab), max_len=MAX_LEN)


@pytest.fixture
def toy_model(toy_config):
    return init_model(toy_config, feat=False, seed=7, dtype=torch.float64)


@pytest.fixture
def toy_meta(toy_config, synthetic_vocab):
    return CheckpointMeta(
        encoder=toy_config,
        feat=False,
        seed=7,
        vocab_digest=synthetic_vocab.digest(),
        epoch=1,
    )


@pytest.fixture
def bundle_dir(tmp_path, toy_model, toy_meta, synthetic_vocab):
    """Single-model bundle of the untrained toy model."""
    return write_bundle(
        tmp_path / "bundle",
        subtask=Subtask.SINGLE_WORD,
        max_len=MAX_LEN,
        vocab=synthetic_vocab,
        states={"all": toy_model.state_dict()},
        metas={"all": toy_meta},
    )
