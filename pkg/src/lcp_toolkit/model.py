"""Transformer encoder, regression heads and the shared-encoder multi-task model."""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, model_validator
from torch import nn

from .encoding import PAD_ID, TokenSequence
from .utils.errors import NotFoundError, ValidationError

logger = logging.getLogger(__name__)

# Masked attention scores use a large finite value so an all-padding row
# still produces finite (uniform) attention weights.
MASK_VALUE = -1e9

ENCODER_PRESETS: Dict[str, Dict[str, float]] = {
    "bert_base": {
        "layers": 12, "heads": 12, "hidden": 768, "feedforward": 3072, "dropout": 0.1
    },
    "roberta_base": {
        "layers": 12, "heads": 12, "hidden": 768, "feedforward": 3072, "dropout": 0.1
    },
    "roberta_large": {
        "layers": 24, "heads": 16, "hidden": 1024, "feedforward": 4096, "dropout": 0.1
    },
    "toy": {"layers": 2, "heads": 2, "hidden": 32, "feedforward": 64, "dropout": 0.0},
    "debug": {"layers": 0, "heads": 1, "hidden": 8, "feedforward": 8, "dropout": 0.0},
}


class EncoderConfig(BaseModel):
    """Shape of the text encoder."""

    model_config = ConfigDict(frozen=True)

    layers: int
    heads: int
    hidden: int
    feedforward: int
    vocab_size: int
    max_len: int
    dropout: float = 0.0

    @model_validator(mode="after")
    def validate_shape(self) -> "EncoderConfig":
        # layers may be 0: the debug preset is embeddings only.
        if self.layers < 0:
            raise ValidationError("layers", "layers cannot be negative", self.layers)
        for name in ("heads", "hidden", "feedforward", "vocab_size", "max_len"):
            if getattr(self, name) < 1:
                raise ValidationError(name, f"{name} must be at least 1", getattr(self, name))
        if self.hidden % self.heads != 0:
            raise ValidationError(
                "heads",
                f"hidden size {self.hidden} is not divisible by {self.heads} heads",
                self.heads,
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout", "dropout must lie in [0, 1)", self.dropout)
        return self


def preset_config(
    name: str, vocab_size: int, max_len: int, dropout: Optional[float] = None
) -> EncoderConfig:
    """Encoder config for a named preset."""
    if name not in ENCODER_PRESETS:
        raise NotFoundError("Encoder preset", name)
    preset = dict(ENCODER_PRESETS[name])
    if dropout is not None:
        preset["dropout"] = dropout
    return EncoderConfig(vocab_size=vocab_size, max_len=max_len, **preset)


class SelfAttention(nn.Module):
    def __init__(self, hidden: int, heads: int, dropout: float) -> None:
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.out = nn.Linear(hidden, hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        batch, length, hidden = x.shape
        q, k, v = self.qkv(x).split(hidden, dim=-1)
        q, k, v = (
            t.view(batch, length, self.heads, self.head_dim).transpose(1, 2) for t in (q, k, v)
        )
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~pad_mask[:, None, None, :], MASK_VALUE)
        weights = self.dropout(scores.softmax(dim=-1))
        context = (weights @ v).transpose(1, 2).reshape(batch, length, hidden)
        return self.out(context)


class EncoderBlock(nn.Module):
    """Pre-norm transformer block with a GELU feedforward."""

    def __init__(self, cfg: EncoderConfig) -> None:
        super().__init__()
        self.attention_norm = nn.LayerNorm(cfg.hidden)
        self.attention = SelfAttention(cfg.hidden, cfg.heads, cfg.dropout)
        self.feedforward_norm = nn.LayerNorm(cfg.hidden)
        self.feedforward_in = nn.Linear(cfg.hidden, cfg.feedforward)
        self.feedforward_out = nn.Linear(cfg.feedforward, cfg.hidden)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        x = x + self.dropout(self.attention(self.attention_norm(x), pad_mask))
        hidden = F.gelu(self.feedforward_in(self.feedforward_norm(x)))
        return x + self.dropout(self.feedforward_out(hidden))


class TextEncoder(nn.Module):
    """Token + learned position embeddings followed by transformer blocks."""

    def __init__(self, cfg: EncoderConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.token_embedding = nn.Embedding(cfg.vocab_size, cfg.hidden)
        self.position_embedding = nn.Embedding(cfg.max_len, cfg.hidden)
        self.embedding_dropout = nn.Dropout(cfg.dropout)
        self.blocks = nn.ModuleList(EncoderBlock(cfg) for _ in range(cfg.layers))
        self.final_norm = nn.LayerNorm(cfg.hidden) if cfg.layers > 0 else nn.Identity()

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        """Embedding-layer output; adversarial perturbations are added here."""
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.cfg.vocab_size):
            raise ValidationError(
                "ids", f"token id outside [0, {self.cfg.vocab_size})", int(ids.max())
            )
        if ids.shape[-1] > self.cfg.max_len:
            raise ValidationError(
                "ids", f"sequence longer than {self.cfg.max_len}", ids.shape[-1]
            )
        positions = torch.arange(ids.shape[-1], device=ids.device)
        return self.token_embedding(ids) + self.position_embedding(positions)

    def encode_states(self, embeddings: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        """Last-layer hidden states; padding positions are never attended to."""
        x = self.embedding_dropout(embeddings)
        for block in self.blocks:
            x = block(x, pad_mask)
        return self.final_norm(x)


class RegressionHead(nn.Module):
    """Dropout, optional feature concatenation, then a linear map to one score."""

    def __init__(self, hidden: int, feat_enabled: bool, dropout: float) -> None:
        super().__init__()
        self.feat_enabled = feat_enabled
        self.dropout = nn.Dropout(dropout)
        self.linear = nn.Linear(hidden + (1 if feat_enabled else 0), 1)

    def forward(self, pooled: torch.Tensor, feat: Optional[torch.Tensor] = None) -> torch.Tensor:
        pooled = self.dropout(pooled)
        if self.feat_enabled:
            pooled = torch.cat([pooled, feat.to(pooled.dtype).unsqueeze(-1)], dim=-1)
        return self.linear(pooled).squeeze(-1)


def _check_feat(feat_enabled: bool, feat: Optional[torch.Tensor]) -> None:
    if feat_enabled and feat is None:
        raise ValidationError("feat_value", "feature-enriched model needs a feature value", None)
    if not feat_enabled and feat is not None:
        raise ValidationError("feat_value", "model was built without the frequency feature", None)
    if feat is not None and (bool((feat < 0).any()) or bool((feat > 1).any())):
        raise ValidationError("feat_value", "feature values must lie in [0, 1]", None)


class RegressionModel(nn.Module):
    """Encoder plus one scalar head reading the position-0 vector."""

    def __init__(self, encoder: TextEncoder, head: RegressionHead) -> None:
        super().__init__()
        self.encoder = encoder
        self.head = head

    @property
    def feat_enabled(self) -> bool:
        return self.head.feat_enabled

    @property
    def cfg(self) -> EncoderConfig:
        return self.encoder.cfg

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        return self.encoder.embed(ids)

    def forward_embedded(
        self,
        embeddings: torch.Tensor,
        pad_mask: torch.Tensor,
        feat: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Raw (unclamped) scores from an embedding-layer output."""
        _check_feat(self.feat_enabled, feat)
        states = self.encoder.encode_states(embeddings, pad_mask)
        return self.head(states[:, 0], feat)

    def forward(
        self, ids: torch.Tensor, pad_mask: torch.Tensor, feat: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        return self.forward_embedded(self.embed(ids), pad_mask, feat)


class MultiTaskModel(nn.Module):
    """One shared encoder feeding a head per task."""

    def __init__(self, encoder: TextEncoder, heads: Dict[str, RegressionHead]) -> None:
        super().__init__()
        if not heads:
            raise ValidationError("tasks", "a multi-task model needs at least one task", None)
        widths = {head.linear.in_features for head in heads.values()}
        if len(widths) != 1:
            raise ValidationError(
                "tasks", "all heads must read the same encoder width", sorted(widths)
            )
        self.encoder = encoder
        self.heads = nn.ModuleDict(heads)

    @property
    def tasks(self) -> List[str]:
        return list(self.heads.keys())

    @property
    def feat_enabled(self) -> bool:
        return next(iter(self.heads.values())).feat_enabled

    @property
    def cfg(self) -> EncoderConfig:
        return self.encoder.cfg

    def task_model(self, task: str) -> RegressionModel:
        """A RegressionModel view sharing this model's encoder and the task's head."""
        if task not in self.heads:
            raise NotFoundError("Task", task)
        return RegressionModel(self.encoder, self.heads[task])

    def forward(
        self,
        task: str,
        ids: torch.Tensor,
        pad_mask: torch.Tensor,
        feat: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        return self.task_model(task)(ids, pad_mask, feat)


def _init_parameters(modules: Iterable[nn.Module], generator: torch.Generator) -> None:
    """Scaled uniform ±1/sqrt(fan_in); LayerNorm starts at identity."""
    with torch.no_grad():
        for root in modules:
            for module in root.modules():
                if isinstance(module, nn.Linear):
                    bound = 1.0 / math.sqrt(module.in_features)
                    module.weight.uniform_(-bound, bound, generator=generator)
                    module.bias.uniform_(-bound, bound, generator=generator)
                elif isinstance(module, nn.Embedding):
                    bound = 1.0 / math.sqrt(module.embedding_dim)
                    module.weight.uniform_(-bound, bound, generator=generator)
                elif isinstance(module, nn.LayerNorm):
                    module.weight.fill_(1.0)
                    module.bias.fill_(0.0)


def init_model(
    cfg: EncoderConfig, feat: bool, seed: int, dtype: torch.dtype = torch.float64
) -> RegressionModel:
    """
    Build a regression model whose parameters depend only on (cfg, feat, seed).

    The encoder is initialized first and the head second, from one generator,
    so a single-task multi-task model built with the same seed is identical.
    """
    generator = torch.Generator().manual_seed(seed)
    encoder = TextEncoder(cfg).to(dtype)
    head = RegressionHead(cfg.hidden, feat, cfg.dropout).to(dtype)
    _init_parameters([encoder, head], generator)
    logger.debug(f"Initialized regression model (seed={seed}, feat={feat})")
    return RegressionModel(encoder, head)


def init_multitask_model(
    cfg: EncoderConfig,
    tasks: Sequence[str],
    feat: bool,
    seed: int,
    dtype: torch.dtype = torch.float64,
) -> MultiTaskModel:
    """Shared encoder plus one head per task, heads initialized in task order."""
    if len(set(tasks)) != len(tasks):
        raise ValidationError("tasks", "task ids must be unique", list(tasks))
    generator = torch.Generator().manual_seed(seed)
    encoder = TextEncoder(cfg).to(dtype)
    heads = {task: RegressionHead(cfg.hidden, feat, cfg.dropout).to(dtype) for task in tasks}
    _init_parameters([encoder, *heads.values()], generator)
    return MultiTaskModel(encoder, heads)


def sequence_tensors(seq: TokenSequence) -> torch.Tensor:
    return torch.tensor([list(seq.ids)], dtype=torch.long)


def embed(model: RegressionModel, seq: TokenSequence) -> torch.Tensor:
    """Embedding matrix (len × hidden) of one sequence."""
    return model.embed(sequence_tensors(seq))[0]


def encode_states(
    model: RegressionModel, embeddings: torch.Tensor, pad_mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Last-layer states (len × hidden) of one embedding matrix."""
    if embeddings.shape[-1] != model.cfg.hidden:
        raise ValidationError(
            "embeddings", f"width must be {model.cfg.hidden}", embeddings.shape[-1]
        )
    if pad_mask is None:
        pad_mask = torch.ones(embeddings.shape[0], dtype=torch.bool)
    return model.encoder.encode_states(embeddings.unsqueeze(0), pad_mask.unsqueeze(0))[0]


def _feat_tensor(model: nn.Module, feat_value: Optional[float]) -> Optional[torch.Tensor]:
    if feat_value is None:
        return None
    dtype = next(model.parameters()).dtype
    return torch.tensor([feat_value], dtype=dtype)


def predict(
    model: RegressionModel, seq: TokenSequence, feat_value: Optional[float] = None
) -> float:
    """Complexity score in [0, 1]; clamping happens only here, never in training."""
    ids = sequence_tensors(seq)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            raw = model(ids, ids != PAD_ID, _feat_tensor(model, feat_value))
    finally:
        model.train(was_training)
    return float(raw.clamp(0.0, 1.0)[0])


def mtl_forward(
    model: MultiTaskModel, task: str, seq: TokenSequence, feat_value: Optional[float] = None
) -> float:
    """Clamped score of one task head over the shared encoder."""
    return predict(model.task_model(task), seq, feat_value)
