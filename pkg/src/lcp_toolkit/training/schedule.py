"""Warmup-then-linear-decay learning rate and global-norm gradient clipping."""

import math
from typing import Iterable, List, Sequence

import torch

from ..utils.config import TrainingConfig
from ..utils.errors import NumericError, ValidationError


def warmup_steps(total_steps: int, warmup_fraction: float) -> int:
    """
    Step at which the learning rate peaks.

    ceil(warmup_fraction * total), kept inside [1, total - 1] so both the
    ramp and the decay span at least one step whenever total >= 2.
    """
    # Rounding first keeps 0.1 * 100 at 10 instead of 10.000000000000002.
    boundary = math.ceil(round(warmup_fraction * total_steps, 9))
    return min(max(boundary, 1), max(total_steps - 1, 1))


def lr_at(step: int, total_steps: int, cfg: TrainingConfig) -> float:
    """
    Learning rate of the update with 0-based index `step`.

    Rises linearly from 0 at step 0 to cfg.learning_rate at the warmup
    boundary, then falls linearly to 0 at `total_steps`. Warmup starts from
    zero, so the first update (step 0) leaves the parameters unchanged.

    Raises:
        ValidationError: If total_steps < 1 or step is outside [0, total_steps]
    """
    if total_steps < 1:
        raise ValidationError("total_steps", "total_steps must be at least 1", total_steps)
    if not 0 <= step <= total_steps:
        raise ValidationError("step", f"step must lie in [0, {total_steps}]", step)

    peak = cfg.learning_rate
    boundary = warmup_steps(total_steps, cfg.warmup_fraction)
    if step >= total_steps:
        return 0.0
    if step <= boundary:
        return peak * (step / boundary)
    return peak * ((total_steps - step) / (total_steps - boundary))


def global_norm(grads: Iterable[torch.Tensor]) -> float:
    """L2 norm over every element of every tensor, accumulated in float64."""
    squares = [float(torch.sum(g.detach().to(torch.float64) ** 2)) for g in grads]
    return math.sqrt(math.fsum(squares))


def clip_gradients(grads: Sequence[torch.Tensor], clip_norm: float) -> List[torch.Tensor]:
    """
    Scale all gradients by clip_norm / g when their global norm g exceeds clip_norm.

    Returns the input tensors untouched when g <= clip_norm.

    Raises:
        NumericError: If any gradient is NaN or infinite
    """
    grads = list(grads)
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise NumericError(f"non-finite gradient norm ({norm})")
    if norm <= clip_norm:
        return grads
    scale = clip_norm / norm
    return [g * scale for g in grads]


def clip_parameter_gradients(
    parameters: Iterable[torch.nn.Parameter], clip_norm: float, step: int = 0
) -> float:
    """
    In-place clip_gradients over the parameters that received a gradient.

    Returns:
        float: The global norm before clipping
    """
    params = [p for p in parameters if p.grad is not None]
    if not params:
        return 0.0
    grads = [p.grad for p in params]
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise NumericError(f"non-finite gradient norm ({norm}) at step {step}", step=step)
    if norm > clip_norm:
        scale = clip_norm / norm
        with torch.no_grad():
            for p in params:
                p.grad.mul_(scale)
    return norm
