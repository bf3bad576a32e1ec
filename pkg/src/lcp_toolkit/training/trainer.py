"""Standard, feature-enriched, adversarial, multi-step and multi-task training."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from ..corpus import Dataset
from ..evaluation import PredictionSet, evaluate
from ..model import MultiTaskModel, RegressionModel
from ..persistence import parameter_digest
from ..utils.config import AdversarialConfig, TrainingConfig
from ..utils.errors import MetricError, NumericError, ValidationError
from ..utils.performance import performance_context, performance_tracked
from .batching import EncodedExample, RunContext
from .checkpoints import CheckpointSet, Snapshot
from .objectives import smart_loss, task_loss
from .schedule import clip_parameter_gradients, lr_at
from .selection import select_best

logger = logging.getLogger(__name__)

SINGLE_TASK_METHODS = frozenset({"standard", "feat", "adv"})
DEFAULT_TASK = "main"

# Perturbation seeds are derived per optimizer step from the run seed.
_STEP_SEED_STRIDE = 100_003


def step_seed(seed: int, step: int) -> int:
    return seed * _STEP_SEED_STRIDE + step


def parse_method(method: str) -> FrozenSet[str]:
    """'feat+adv' → {'feat', 'adv'}; only the single-model methods are accepted."""
    tokens = frozenset(token.strip().lower() for token in method.split("+") if token.strip())
    unknown = sorted(tokens - SINGLE_TASK_METHODS)
    if not tokens or unknown:
        raise ValidationError(
            "method",
            f"expected a '+'-joined subset of {sorted(SINGLE_TASK_METHODS)}",
            method,
        )
    return tokens


@dataclass
class _TaskStream:
    task: str
    model: RegressionModel
    train_examples: List[EncodedExample]
    dev: Dataset
    dev_examples: List[EncodedExample]
    checkpoints: CheckpointSet


def _predict_examples(
    model: RegressionModel, examples: Sequence[EncodedExample], context: RunContext
) -> PredictionSet:
    if not examples:
        return PredictionSet(scores={})
    scores: Dict[str, float] = {}
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            for batch in context.batches(examples):
                raw = model(batch.ids, batch.pad_mask, batch.feats)
                if not bool(torch.isfinite(raw).all()):
                    raise NumericError("model produced non-finite scores")
                for instance_id, value in zip(batch.instance_ids, raw.clamp(0.0, 1.0).tolist()):
                    scores[instance_id] = value
    finally:
        model.train(was_training)
    return PredictionSet(scores=scores)


def predict_split(model: RegressionModel, dataset: Dataset, context: RunContext) -> PredictionSet:
    """Clamped predictions for every instance of a dataset, in evaluation mode."""
    return _predict_examples(model, context.encode(dataset, feat=model.feat_enabled), context)


def _dev_report(predictions: PredictionSet, dev: Dataset):
    if not dev.is_labeled or len(dev) < 2:
        return None
    try:
        return evaluate(predictions, dev)
    except MetricError as e:
        logger.warning(f"Dev metrics undefined this epoch: {e.message}")
        return None


def _fit(
    owner: nn.Module,
    streams: List[_TaskStream],
    cfg: TrainingConfig,
    adv: Optional[AdversarialConfig],
    context: RunContext,
) -> None:
    """
    Shared optimization loop.

    Every epoch each task's examples are shuffled with the order RNG and cut
    into batches; the task labels of all batches are then shuffled with a
    separate interleave RNG, so one task reduces to plain shuffled training.
    Each step updates the shared parameters and only the stepping task's head.
    """
    torch.manual_seed(cfg.seed)
    owner.train()
    order_rng = np.random.default_rng(cfg.seed)
    interleave_rng = np.random.default_rng([cfg.seed, 1])

    batches_per_epoch = sum(math.ceil(len(s.train_examples) / cfg.batch_size) for s in streams)
    total_steps = batches_per_epoch * cfg.max_epochs
    optimizer = torch.optim.Adam(
        owner.parameters(),
        lr=0.0,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
    )
    by_task = {s.task: s for s in streams}
    step = 0

    for epoch in range(1, cfg.max_epochs + 1):
        with performance_context("training.epoch"):
            batches = {}
            for s in streams:
                order = order_rng.permutation(len(s.train_examples))
                shuffled = [s.train_examples[i] for i in order]
                batches[s.task] = context.batches(shuffled, cfg.batch_size)
            schedule = [task for task, task_batches in batches.items() for _ in task_batches]
            interleave_rng.shuffle(schedule)

            cursor = {task: 0 for task in batches}
            losses: Dict[str, List[float]] = {task: [] for task in batches}
            for task in schedule:
                batch = batches[task][cursor[task]]
                cursor[task] += 1
                model = by_task[task].model

                for group in optimizer.param_groups:
                    group["lr"] = lr_at(step, total_steps, cfg)
                optimizer.zero_grad(set_to_none=True)
                if adv is not None:
                    loss = smart_loss(model, batch, adv, step_seed(cfg.seed, step))
                else:
                    loss = task_loss(model, batch)
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise NumericError(f"non-finite loss ({value}) at step {step}", step=step)
                loss.backward()
                clip_parameter_gradients(owner.parameters(), cfg.clip_norm, step)
                optimizer.step()
                losses[task].append(value)
                step += 1

            for s in streams:
                predictions = _predict_examples(s.model, s.dev_examples, context)
                report = _dev_report(predictions, s.dev)
                train_loss = float(np.mean(losses[s.task]))
                s.checkpoints.snapshots.append(
                    Snapshot(
                        epoch=epoch,
                        state={k: v.detach().clone() for k, v in s.model.state_dict().items()},
                        train_loss=train_loss,
                        dev_predictions=predictions,
                        dev_report=report,
                    )
                )
                dev_text = report.summary() if report is not None else "undefined"
                logger.info(
                    f"[{s.task}] epoch {epoch}/{cfg.max_epochs} "
                    f"train_loss={train_loss:.6f} dev: {dev_text}"
                )


def _check_non_empty(name: str, dataset: Dataset) -> None:
    if len(dataset) == 0:
        raise ValidationError(name, f"{name} is empty", 0)
    if not dataset.is_labeled:
        raise ValidationError(name, f"{name} must be fully labeled for training", len(dataset))


@performance_tracked("training.train")
def train(
    model: RegressionModel,
    train_data: Dataset,
    dev_data: Dataset,
    cfg: TrainingConfig,
    method: str = "standard",
    adv: Optional[AdversarialConfig] = None,
    *,
    context: RunContext,
    task: str = DEFAULT_TASK,
) -> CheckpointSet:
    """
    Fine-tune a regression model and snapshot it after every epoch.

    Args:
        model: Model to update in place
        train_data: Labeled training split
        dev_data: Split predicted after every epoch
        cfg: Optimizer, schedule and clipping settings
        method: 'standard', 'feat', 'adv' or a '+'-joined combination
        adv: Perturbation settings; defaults apply when 'adv' is requested
        context: Vocabulary, length limit and frequency feature inputs
        task: Name recorded on the checkpoint set

    Returns:
        CheckpointSet: Exactly cfg.max_epochs snapshots

    Raises:
        ValidationError: On empty or unlabeled training data, or when the
            method and the model disagree about the frequency feature
        NumericError: If the loss or gradients stop being finite
    """
    tokens = parse_method(method)
    if ("feat" in tokens) != model.feat_enabled:
        raise ValidationError(
            "method", "the 'feat' method requires a model built with the frequency feature", method
        )
    _check_non_empty("train_data", train_data)
    if "adv" in tokens and adv is None:
        adv = AdversarialConfig()

    checkpoints = CheckpointSet(task=task, config=cfg, initial_digest=parameter_digest(model))
    stream = _TaskStream(
        task=task,
        model=model,
        train_examples=context.encode(train_data, feat=model.feat_enabled),
        dev=dev_data,
        dev_examples=context.encode(dev_data, feat=model.feat_enabled),
        checkpoints=checkpoints,
    )
    logger.info(
        f"Training [{task}] method={'+'.join(sorted(tokens))} lr={cfg.learning_rate} "
        f"batch={cfg.batch_size} epochs={cfg.max_epochs} on {len(train_data)} instances"
    )
    _fit(model, [stream], cfg, adv if "adv" in tokens else None, context)
    return checkpoints


@performance_tracked("training.train_msft")
def train_msft(
    model: RegressionModel,
    stage1: Tuple[Dataset, Dataset],
    stage2: Tuple[Dataset, Dataset],
    cfg: TrainingConfig,
    method: str = "standard",
    adv: Optional[AdversarialConfig] = None,
    *,
    context: RunContext,
    stage1_cfg: Optional[TrainingConfig] = None,
) -> CheckpointSet:
    """
    Multi-step fine-tuning: train on a related task, then on the target task.

    Stage 1's best epoch is chosen by whole-dev Pearson on its own dev split
    and loaded before stage 2 starts, so stage 2's initial digest equals that
    snapshot's digest.

    Args:
        stage1: (train, dev) of the auxiliary task
        stage2: (train, dev) of the target task
        stage1_cfg: Stage-1 optimizer settings; defaults to `cfg`

    Returns:
        CheckpointSet: Stage-2 snapshots, with stage 1 attached
    """
    stage1_train, stage1_dev = stage1
    stage2_train, stage2_dev = stage2
    _check_non_empty("stage1", stage1_train)
    _check_non_empty("stage2", stage2_train)

    first = train(
        model,
        stage1_train,
        stage1_dev,
        stage1_cfg or cfg,
        method,
        adv,
        context=context,
        task="stage1",
    )
    selection = select_best(first, stage1_dev, per_domain=False)
    chosen = selection.snapshot()
    model.load_state_dict(chosen.state)
    logger.info(
        f"Stage 1 selected epoch {chosen.epoch} "
        f"(dev pearson {selection.scores['all']:.4f})"
    )

    second = train(
        model, stage2_train, stage2_dev, cfg, method, adv, context=context, task="stage2"
    )
    if second.initial_digest != chosen.digest:
        raise NumericError("stage-2 parameters differ from the selected stage-1 snapshot")
    second.stage1 = first
    second.stage1_epoch = chosen.epoch
    return second


@performance_tracked("training.train_mtl")
def train_mtl(
    mtm: MultiTaskModel,
    tasks: Mapping[str, Tuple[Dataset, Dataset]],
    cfg: TrainingConfig,
    method: str = "standard",
    adv: Optional[AdversarialConfig] = None,
    *,
    context: RunContext,
) -> Dict[str, CheckpointSet]:
    """
    Train a shared encoder on interleaved batches of several tasks.

    Args:
        mtm: Multi-task model holding a head for every task in `tasks`
        tasks: Task id → (train, dev)

    Returns:
        Dict[str, CheckpointSet]: Per-task snapshots of the encoder plus that task's head

    Raises:
        ValidationError: If `tasks` is empty or a task's training split is empty
        NotFoundError: If a task has no head in `mtm`
    """
    if not tasks:
        raise ValidationError("tasks", "multi-task training needs at least one task", 0)
    tokens = parse_method(method)
    if ("feat" in tokens) != mtm.feat_enabled:
        raise ValidationError(
            "method", "the 'feat' method requires a model built with the frequency feature", method
        )
    if "adv" in tokens and adv is None:
        adv = AdversarialConfig()

    streams = []
    for task, (train_data, dev_data) in tasks.items():
        _check_non_empty(f"tasks.{task}", train_data)
        model = mtm.task_model(task)
        streams.append(
            _TaskStream(
                task=task,
                model=model,
                train_examples=context.encode(train_data, feat=mtm.feat_enabled),
                dev=dev_data,
                dev_examples=context.encode(dev_data, feat=mtm.feat_enabled),
                checkpoints=CheckpointSet(
                    task=task, config=cfg, initial_digest=parameter_digest(model)
                ),
            )
        )
    logger.info(f"Multi-task training over {list(tasks)} method={'+'.join(sorted(tokens))}")
    _fit(mtm, streams, cfg, adv if "adv" in tokens else None, context)
    return {s.task: s.checkpoints for s in streams}
