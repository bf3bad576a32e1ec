"""Checkpoint files, checkpoint bundles and parameter digests."""

import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import torch
from torch import nn

from .corpus import (
    DOMAINS,
    FrequencyTable,
    Normalizer,
    Subtask,
    load_frequency_table,
    write_frequency_table,
)
from .encoding import Vocabulary, load_vocab, save_vocab
from .model import EncoderConfig, RegressionModel, init_model
from .utils.errors import DataError, ValidationError
from .utils.files import atomic_write_bytes, atomic_write_text
from .utils.validation import validate_file_exists

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
BUNDLE_MANIFEST = "bundle.json"
BUNDLE_MODEL = "model.pt"
BUNDLE_VOCAB = "vocab.tsv"
BUNDLE_FREQUENCIES = "frequencies.tsv"

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def dtype_name(dtype: torch.dtype) -> str:
    for name, value in DTYPES.items():
        if value == dtype:
            return name
    raise ValidationError("dtype", "unsupported parameter dtype", str(dtype))


def parameter_digest(source: Union[nn.Module, Mapping[str, torch.Tensor]]) -> str:
    """SHA-256 over (name, dtype, shape, bytes) of every tensor, in key order."""
    state = source.state_dict() if isinstance(source, nn.Module) else source
    digest = hashlib.sha256()
    for name in sorted(state):
        tensor = state[name].detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(tensor.dtype).encode("ascii"))
        digest.update(str(tuple(tensor.shape)).encode("ascii"))
        digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()


@dataclass
class CheckpointMeta:
    """Everything needed to rebuild a model besides its parameters."""

    encoder: EncoderConfig
    feat: bool
    seed: int
    vocab_digest: str
    dtype: str = "float64"
    normalizer: Optional[Normalizer] = None
    epoch: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(
    state: Mapping[str, torch.Tensor], meta: CheckpointMeta, path: Union[str, Path]
) -> Path:
    """Write one model state with its metadata; the write is atomic."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "encoder": meta.encoder.model_dump(),
        "feat": meta.feat,
        "seed": meta.seed,
        "vocab_digest": meta.vocab_digest,
        "dtype": meta.dtype,
        "normalizer": None
        if meta.normalizer is None
        else {"min": meta.normalizer.min, "max": meta.normalizer.max},
        "epoch": meta.epoch,
        "extra": json.dumps(meta.extra, sort_keys=True),
        "state": {name: tensor.detach().cpu() for name, tensor in state.items()},
    }
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    return atomic_write_bytes(path, buffer.getvalue())


def load_checkpoint(path: Union[str, Path]) -> "LoadedCheckpoint":
    """
    Rebuild a regression model from a checkpoint file.

    Raises:
        NotFoundError: If the file is missing
        DataError: If the file is not a readable checkpoint of this format
    """
    path = validate_file_exists(path, "Checkpoint")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise DataError(f"unreadable checkpoint: {e}", path=str(path))
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError("unsupported checkpoint format", path=str(path))

    normalizer = payload["normalizer"]
    meta = CheckpointMeta(
        encoder=EncoderConfig(**payload["encoder"]),
        feat=bool(payload["feat"]),
        seed=int(payload["seed"]),
        vocab_digest=payload["vocab_digest"],
        dtype=payload["dtype"],
        normalizer=None if normalizer is None else Normalizer(**normalizer),
        epoch=payload["epoch"],
        extra=json.loads(payload["extra"]),
    )
    model = init_model(meta.encoder, meta.feat, meta.seed, DTYPES[meta.dtype])
    try:
        model.load_state_dict(payload["state"])
    except RuntimeError as e:
        raise DataError(f"checkpoint parameters do not fit its config: {e}", path=str(path))
    return LoadedCheckpoint(model=model, meta=meta, path=path)


@dataclass
class LoadedCheckpoint:
    model: RegressionModel
    meta: CheckpointMeta
    path: Path


@dataclass
class Bundle:
    """
    A directory holding everything prediction needs.

    `models` maps a routing key to a loaded checkpoint: the single key "all"
    for a whole-dev selection, or one key per domain when the bundle routes
    instances by domain.
    """

    path: Path
    subtask: Subtask
    max_len: int
    vocab: Vocabulary
    models: Dict[str, LoadedCheckpoint]
    table: Optional[FrequencyTable] = None

    @property
    def routed(self) -> bool:
        return "all" not in self.models

    @property
    def feat(self) -> bool:
        return next(iter(self.models.values())).meta.feat

    @property
    def normalizer(self) -> Optional[Normalizer]:
        return next(iter(self.models.values())).meta.normalizer

    @property
    def dtype(self) -> torch.dtype:
        return DTYPES[next(iter(self.models.values())).meta.dtype]


def write_bundle(
    out_dir: Union[str, Path],
    *,
    subtask: Subtask,
    max_len: int,
    vocab: Vocabulary,
    states: Mapping[str, Mapping[str, torch.Tensor]],
    metas: Mapping[str, CheckpointMeta],
    table: Optional[FrequencyTable] = None,
) -> Path:
    """
    Write a checkpoint bundle.

    Args:
        out_dir: Bundle directory, created if needed
        subtask: Subtask the models were trained for
        max_len: Encoding length limit used in training
        vocab: Vocabulary the models were trained with
        states: Routing key ("all" or a domain name) → model state
        metas: Routing key → checkpoint metadata
        table: Frequency table, required for feature-enriched models

    Raises:
        ValidationError: If the routing keys are neither {"all"} nor all three domains
    """
    out_dir = Path(out_dir)
    keys = set(states)
    if keys != {"all"}:
        validate_routing({key: key for key in keys})

    files: Dict[str, str] = {}
    if keys == {"all"}:
        files["all"] = BUNDLE_MODEL
        save_checkpoint(states["all"], metas["all"], out_dir / BUNDLE_MODEL)
    else:
        # Domains that selected the same state share one file.
        written: Dict[str, str] = {}
        for domain in DOMAINS:
            key = domain.value
            digest = parameter_digest(states[key])
            if digest not in written:
                written[digest] = f"model_{key}.pt"
                save_checkpoint(states[key], metas[key], out_dir / written[digest])
            files[key] = written[digest]

    save_vocab(vocab, out_dir / BUNDLE_VOCAB)
    feat = any(meta.feat for meta in metas.values())
    if feat:
        if table is None:
            raise ValidationError(
                "table", "feature-enriched bundles need the frequency table", None
            )
        write_frequency_table(table, out_dir / BUNDLE_FREQUENCIES)

    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "subtask": subtask.value,
        "max_len": max_len,
        "vocab": BUNDLE_VOCAB,
        "vocab_digest": vocab.digest(),
        "frequencies": BUNDLE_FREQUENCIES if feat else None,
        "routing": files,
        "epochs": {key: metas[key].epoch for key in files},
    }
    atomic_write_text(
        out_dir / BUNDLE_MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    logger.info(f"Wrote checkpoint bundle to {out_dir} (routing keys: {sorted(files)})")
    return out_dir


def load_bundle(path: Union[str, Path]) -> Bundle:
    """
    Load a bundle written by write_bundle.

    Raises:
        NotFoundError: If the directory or one of its files is missing
        DataError: If a checkpoint was trained with a different vocabulary
    """
    path = Path(path)
    manifest_path = validate_file_exists(path / BUNDLE_MANIFEST, "Checkpoint bundle")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"invalid bundle manifest: {e}", path=str(manifest_path))

    vocab_path = path / manifest["vocab"]
    vocab = load_vocab(vocab_path)
    if vocab.digest() != manifest["vocab_digest"]:
        raise DataError(
            "vocabulary does not match the bundle manifest", path=str(vocab_path)
        )

    loaded: Dict[str, LoadedCheckpoint] = {}
    models: Dict[str, LoadedCheckpoint] = {}
    for key, filename in manifest["routing"].items():
        if filename not in loaded:
            loaded[filename] = load_checkpoint(path / filename)
        checkpoint = loaded[filename]
        if checkpoint.meta.vocab_digest != vocab.digest():
            raise DataError(
                "checkpoint was trained with a different vocabulary",
                path=str(checkpoint.path),
            )
        models[key] = checkpoint

    table = None
    if manifest.get("frequencies"):
        table = load_frequency_table(path / manifest["frequencies"])

    return Bundle(
        path=path,
        subtask=Subtask(manifest["subtask"]),
        max_len=int(manifest["max_len"]),
        vocab=vocab,
        models=models,
        table=table,
    )


def validate_routing(routing: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Check that a routing block covers exactly the three domains.

    Raises:
        ValidationError: On missing or unknown domains
    """
    expected = {domain.value for domain in DOMAINS}
    missing = sorted(expected - set(routing))
    unknown = sorted(set(routing) - expected)
    if missing or unknown:
        raise ValidationError(
            "routing",
            f"routing must cover every domain (missing {missing}, unknown {unknown})",
            sorted(routing),
        )
    return dict(routing)

