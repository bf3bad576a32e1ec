"""Task loss, embedding-space PGD and the smoothness-regularized objective."""

import math
from typing import Optional, Tuple

import torch

from ..model import RegressionModel
from ..utils.config import AdversarialConfig
from .batching import EncodedBatch


def task_loss(model: RegressionModel, batch: EncodedBatch) -> torch.Tensor:
    """Mean squared error between raw head outputs and gold labels."""
    gold = batch.gold
    scores = model(batch.ids, batch.pad_mask, batch.feats)
    return torch.mean((scores - gold) ** 2)


def smoothness_loss(perturbed: torch.Tensor, reference: torch.Tensor) -> torch.Tensor:
    """Mean squared difference to a reference output that receives no gradient."""
    return torch.mean((perturbed - reference.detach()) ** 2)


def pgd_perturb(
    model: RegressionModel, batch: EncodedBatch, adv: AdversarialConfig, seed: int
) -> torch.Tensor:
    """
    Search the inf-norm ball of radius epsilon for the perturbation of the
    embedding-layer output that most changes the model's scores.

    The start point is Gaussian with variance adv.init_variance, drawn from a
    generator seeded with `seed` and projected into the ball. Each of the
    adv.pgd_steps ascent steps moves by step_size along the gradient divided
    by its per-example inf-norm; an example whose gradient is zero keeps its
    current perturbation. Padding rows are zero throughout.

    Returns:
        torch.Tensor: Detached perturbation shaped like the embeddings
    """
    embeddings = model.embed(batch.ids).detach()
    mask = batch.pad_mask.unsqueeze(-1).to(embeddings.dtype)
    with torch.no_grad():
        reference = model.forward_embedded(embeddings, batch.pad_mask, batch.feats)

    generator = torch.Generator().manual_seed(seed)
    noise = torch.randn(embeddings.shape, generator=generator, dtype=embeddings.dtype)
    delta = (noise * math.sqrt(adv.init_variance)).clamp(-adv.epsilon, adv.epsilon) * mask

    for _ in range(adv.pgd_steps):
        delta.requires_grad_(True)
        perturbed = model.forward_embedded(embeddings + delta, batch.pad_mask, batch.feats)
        (grad,) = torch.autograd.grad(smoothness_loss(perturbed, reference), delta)
        with torch.no_grad():
            grad = grad * mask
            scale = grad.abs().amax(dim=(1, 2), keepdim=True)
            direction = torch.where(scale > 0, grad / torch.where(scale > 0, scale, 1.0), 0.0)
            delta = (delta + adv.step_size * direction).clamp(-adv.epsilon, adv.epsilon) * mask

    return delta.detach()


def smart_loss_terms(
    model: RegressionModel,
    batch: EncodedBatch,
    adv: AdversarialConfig,
    seed: int,
    delta: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Task and smoothness terms sharing one clean forward pass.

    `delta` overrides the PGD search; a zero tensor gives a zero smoothness
    term. With alpha == 0 and no override the search is skipped.
    """
    gold = batch.gold
    embeddings = model.embed(batch.ids)
    clean = model.forward_embedded(embeddings, batch.pad_mask, batch.feats)
    task = torch.mean((clean - gold) ** 2)
    if delta is None and adv.alpha == 0:
        return task, torch.zeros((), dtype=task.dtype)

    if delta is None:
        delta = pgd_perturb(model, batch, adv, seed)
    perturbed = model.forward_embedded(embeddings + delta, batch.pad_mask, batch.feats)
    return task, smoothness_loss(perturbed, clean)


def smart_loss(
    model: RegressionModel,
    batch: EncodedBatch,
    adv: AdversarialConfig,
    seed: int,
    delta: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """task_loss + alpha * smoothness; alpha == 0 returns the task term itself."""
    task, smoothness = smart_loss_terms(model, batch, adv, seed, delta)
    if adv.alpha == 0:
        return task
    return task + adv.alpha * smoothness
