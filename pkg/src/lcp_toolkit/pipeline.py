"""Experiment orchestration: from a run config to a bundle, predictions and a manifest."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from .corpus import (
    Dataset,
    FrequencyTable,
    Normalizer,
    Split,
    Subtask,
    fit_feature_normalizer,
    load_dataset,
    load_frequency_table,
)
from .encoding import Vocabulary, build_vocab
from .evaluation import EvaluationReport, PredictionSet, evaluate, write_predictions
from .inference import predict_with_bundle
from .manifest import RunManifest
from .model import EncoderConfig, init_model, init_multitask_model, preset_config
from .persistence import DTYPES, CheckpointMeta, load_bundle, write_bundle
from .training import (
    CheckpointSet,
    RunContext,
    Snapshot,
    grid_search,
    select_best,
    train,
    train_msft,
    train_mtl,
)
from .utils.config import RunConfig, TrainingConfig
from .utils.errors import ConfigError, MetricError
from .utils.files import atomic_write_text
from .utils.performance import get_performance_report, performance_tracked

logger = logging.getLogger(__name__)

TARGET_TASK = "target"
AUXILIARY_TASK = "auxiliary"


@dataclass(frozen=True)
class RunInputs:
    """Loaded data and the encoding context shared by every model of a run."""

    train: Dataset
    dev: Dataset
    test: Optional[Dataset]
    stage1_train: Optional[Dataset]
    stage1_dev: Optional[Dataset]
    table: Optional[FrequencyTable]
    normalizer: Optional[Normalizer]
    vocab: Vocabulary
    encoder: EncoderConfig
    context: RunContext


def run_name(cfg: RunConfig) -> str:
    method = cfg.method.replace("+", "-")
    return f"{cfg.subtask}_{method}_{cfg.encoder_preset}_seed{cfg.seed}"


def input_paths(cfg: RunConfig) -> Dict[str, Optional[str]]:
    return cfg.data.model_dump()


def prepare_run(cfg: RunConfig) -> RunInputs:
    """
    Load every input of a run and build the shared vocabulary and normalizer.

    Both are fitted on the union of the run's training splits.

    Raises:
        ConfigError: If train or dev paths are missing
    """
    if not cfg.data.train or not cfg.data.dev:
        raise ConfigError("a run needs data.train and data.dev", key="data")
    train_data = load_dataset(cfg.data.train, cfg.subtask, Split.TRAIN)
    dev = load_dataset(cfg.data.dev, cfg.subtask, Split.TRIAL)
    test = load_dataset(cfg.data.test, cfg.subtask, Split.TEST) if cfg.data.test else None

    stage1_train = stage1_dev = None
    if "msft" in cfg.methods or "mtl" in cfg.methods:
        auxiliary = Subtask(cfg.auxiliary_subtask)
        stage1_train = load_dataset(cfg.data.stage1_train, auxiliary, Split.TRAIN)
        stage1_dev = load_dataset(cfg.data.stage1_dev, auxiliary, Split.TRIAL)

    train_sets = [train_data] + ([stage1_train] if stage1_train is not None else [])
    vocab = build_vocab(train_sets, min_count=cfg.min_count)

    table = normalizer = None
    if cfg.use_feat:
        table = load_frequency_table(cfg.data.frequencies)
        normalizer = fit_feature_normalizer(train_sets, table)
        logger.info(f"Feature normalizer: min={normalizer.min:.4f} max={normalizer.max:.4f}")

    encoder = preset_config(cfg.encoder_preset, len(vocab), cfg.max_len, cfg.dropout)
    context = RunContext(
        vocab=vocab,
        max_len=cfg.max_len,
        table=table,
        normalizer=normalizer,
        dtype=DTYPES[cfg.dtype],
    )
    return RunInputs(
        train=train_data,
        dev=dev,
        test=test,
        stage1_train=stage1_train,
        stage1_dev=stage1_dev,
        table=table,
        normalizer=normalizer,
        vocab=vocab,
        encoder=encoder,
        context=context,
    )


def single_model_method(cfg: RunConfig) -> str:
    """The standard/feat/adv part of a composed method string."""
    tokens = sorted(cfg.methods & {"feat", "adv"})
    if cfg.use_feat and "feat" not in tokens:
        tokens = sorted(tokens + ["feat"])
    return "+".join(tokens) or "standard"


def make_train_fn(cfg: RunConfig, inputs: RunInputs) -> Callable[[TrainingConfig], CheckpointSet]:
    """
    A function training a freshly initialized model with the run's method.

    It returns the checkpoints of the target task, so grid search can treat
    every method alike.
    """
    method = single_model_method(cfg)
    dtype = DTYPES[cfg.dtype]

    def train_fn(training: TrainingConfig) -> CheckpointSet:
        if "mtl" in cfg.methods:
            mtm = init_multitask_model(
                inputs.encoder, [TARGET_TASK, AUXILIARY_TASK], cfg.use_feat, cfg.seed, dtype
            )
            results = train_mtl(
                mtm,
                {
                    TARGET_TASK: (inputs.train, inputs.dev),
                    AUXILIARY_TASK: (inputs.stage1_train, inputs.stage1_dev),
                },
                training,
                method,
                cfg.adv,
                context=inputs.context,
            )
            return results[TARGET_TASK]

        model = init_model(inputs.encoder, cfg.use_feat, cfg.seed, dtype)
        if "msft" in cfg.methods:
            return train_msft(
                model,
                (inputs.stage1_train, inputs.stage1_dev),
                (inputs.train, inputs.dev),
                training,
                method,
                cfg.adv,
                context=inputs.context,
            )
        return train(
            model,
            inputs.train,
            inputs.dev,
            training,
            method,
            cfg.adv,
            context=inputs.context,
            task=TARGET_TASK,
        )

    return train_fn


def _meta(cfg: RunConfig, inputs: RunInputs, snapshot: Snapshot) -> CheckpointMeta:
    return CheckpointMeta(
        encoder=inputs.encoder,
        feat=cfg.use_feat,
        seed=cfg.seed,
        vocab_digest=inputs.vocab.digest(),
        dtype=cfg.dtype,
        normalizer=inputs.normalizer,
        epoch=snapshot.epoch,
    )


def save_selected(
    cfg: RunConfig, inputs: RunInputs, snapshots: Dict[str, Snapshot], out_dir: Path
) -> Path:
    """Write the selected snapshot(s) as a bundle; keys are "all" or domains."""
    return write_bundle(
        out_dir,
        subtask=Subtask(cfg.subtask),
        max_len=cfg.max_len,
        vocab=inputs.vocab,
        states={key: snapshot.state for key, snapshot in snapshots.items()},
        metas={key: _meta(cfg, inputs, snapshot) for key, snapshot in snapshots.items()},
        table=inputs.table,
    )


def _report_or_none(predictions: PredictionSet, gold: Dataset) -> Optional[EvaluationReport]:
    if not gold.is_labeled or len(gold) == 0:
        return None
    try:
        return evaluate(predictions, gold)
    except MetricError as e:
        logger.warning(f"Metrics undefined for {gold.split.value}: {e.message}")
        return None


def _finish_run(
    cfg: RunConfig,
    inputs: RunInputs,
    manifest: RunManifest,
    run_dir: Path,
    bundle_dir: Path,
    summary: Dict[str, Any],
) -> Dict[str, Any]:
    """Predict dev/test with the saved bundle, write reports and close the manifest."""
    manifest.add_artifact("bundle", bundle_dir)
    bundle = load_bundle(bundle_dir)
    reports: Dict[str, Any] = {}
    artifacts: Dict[str, str] = {"bundle": str(bundle_dir)}
    for name, dataset in (("dev", inputs.dev), ("test", inputs.test)):
        if dataset is None:
            continue
        predictions = predict_with_bundle(bundle, dataset)
        path = write_predictions(predictions, run_dir / f"{name}_predictions.csv")
        manifest.add_artifact(f"{name}_predictions", path)
        artifacts[f"{name}_predictions"] = str(path)
        report = _report_or_none(predictions, dataset)
        if report is not None:
            report_path = atomic_write_text(
                run_dir / f"{name}_report.json", report.to_json() + "\n"
            )
            manifest.add_artifact(f"{name}_report", report_path)
            reports[name] = report.model_dump()
            logger.info(f"{name} metrics: {report.summary()}")

    summary = {**summary, "artifacts": artifacts, "reports": reports}
    atomic_write_text(
        run_dir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    manifest.finish({"summary": summary, "performance": get_performance_report()})
    return summary


@performance_tracked("pipeline.run_training")
def run_training(cfg: RunConfig, run_dir: Optional[Path] = None) -> Dict[str, Any]:
    """
    Train with the configured method, select epochs, save the bundle and predict.

    Returns:
        Dict[str, Any]: Run summary (selected epochs, scores, artifacts, reports)
    """
    run_dir = Path(run_dir) if run_dir is not None else Path(cfg.output_dir) / run_name(cfg)
    manifest = RunManifest.start(
        run_dir, "train", cfg.model_dump(by_alias=True), cfg.seed, input_paths(cfg)
    )
    inputs = prepare_run(cfg)
    checkpoints = make_train_fn(cfg, inputs)(cfg.training_config())
    if checkpoints.stage1 is not None:
        manifest.log_epochs(checkpoints.stage1.epoch_log())
    manifest.log_epochs(checkpoints.epoch_log())

    selection = select_best(checkpoints, inputs.dev, per_domain=cfg.per_domain_selection)
    bundle_dir = save_selected(cfg, inputs, selection.snapshots(), run_dir / "bundle")
    summary = {
        "run": run_name(cfg),
        "selected_epochs": dict(selection.epochs),
        "selection_scores": dict(selection.scores),
        "stage1_epoch": checkpoints.stage1_epoch,
        "initial_digest": checkpoints.initial_digest,
        "snapshot_digests": {key: s.digest for key, s in selection.snapshots().items()},
    }
    return _finish_run(cfg, inputs, manifest, run_dir, bundle_dir, summary)


@performance_tracked("pipeline.run_grid_search")
def run_grid_search(cfg: RunConfig, run_dir: Optional[Path] = None) -> Dict[str, Any]:
    """
    Train every grid configuration and save the winner(s).

    With per_domain_selection, each domain routes to the (config, epoch) that
    scored best on its own dev instances.
    """
    if cfg.grid is None:
        raise ConfigError("grid search needs a 'grid' block", key="grid")
    if run_dir is None:
        run_dir = Path(cfg.output_dir) / f"{run_name(cfg)}_grid"
    run_dir = Path(run_dir)
    manifest = RunManifest.start(
        run_dir, "grid-search", cfg.model_dump(by_alias=True), cfg.seed, input_paths(cfg)
    )
    inputs = prepare_run(cfg)
    configs = cfg.grid.configs(cfg.training_config())
    result = grid_search(
        make_train_fn(cfg, inputs), configs, inputs.dev, per_domain=cfg.per_domain_selection
    )
    for run in result.runs:
        manifest.log_epochs(
            {**record, "lr": run.config.learning_rate, "batch_size": run.config.batch_size}
            for record in run.checkpoints.epoch_log()
        )

    if result.domain_best is not None:
        snapshots = result.routed_snapshots()
        winners = {
            domain: {
                "lr": run.config.learning_rate,
                "batch_size": run.config.batch_size,
                "epoch": snapshots[domain].epoch,
            }
            for domain, run in result.domain_best.items()
        }
    else:
        snapshots = {"all": result.best.selection.snapshot()}
        winners = {
            "all": {
                "lr": result.best_config.learning_rate,
                "batch_size": result.best_config.batch_size,
                "epoch": snapshots["all"].epoch,
            }
        }
    bundle_dir = save_selected(cfg, inputs, snapshots, run_dir / "bundle")
    summary = {
        "run": f"{run_name(cfg)}_grid",
        "grid_size": len(configs),
        "runs": [
            {
                "lr": run.config.learning_rate,
                "batch_size": run.config.batch_size,
                "best_epoch": run.selection.epochs["all"],
                "dev_pearson": run.selection.scores["all"],
            }
            for run in result.runs
        ],
        "winners": winners,
    }
    return _finish_run(cfg, inputs, manifest, run_dir, bundle_dir, summary)
