"""Unit tests for the standard, multi-step and multi-task training loops."""

import pytest
import torch
from conftest import make_dataset
from pydantic import ValidationError as PydanticValidationError

from lcp_toolkit.corpus import Split
from lcp_toolkit.model import init_model, init_multitask_model
from lcp_toolkit.persistence import parameter_digest
from lcp_toolkit.training import (
    parse_method,
    predict_split,
    select_best,
    step_seed,
    train,
    train_msft,
    train_mtl,
    trainer,
)
from lcp_toolkit.utils.config import AdversarialConfig, TrainingConfig
from lcp_toolkit.utils.errors import NotFoundError, ValidationError


@pytest.fixture
def training_cfg():
    return TrainingConfig(lr=1e-3, batch_size=16, max_epochs=3, seed=5)


def digests(checkpoints):
    return [snapshot.digest for snapshot in checkpoints.snapshots]


class TestTrain:
    """Test cases for single-model training."""

    def test_one_snapshot_per_epoch(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        checkpoints = train(
            toy_model, synthetic_corpus.train, synthetic_corpus.trial, training_cfg,
            context=run_context,
        )
        assert len(checkpoints) == 3
        assert [s.epoch for s in checkpoints.snapshots] == [1, 2, 3]
        dev_size = len(synthetic_corpus.trial)
        assert all(len(s.dev_predictions) == dev_size for s in checkpoints.snapshots)

    def test_same_seed_is_bit_identical(
        self, toy_config, synthetic_corpus, run_context, training_cfg
    ):
        runs = [
            train(
                init_model(toy_config, False, seed=3), synthetic_corpus.train,
                synthetic_corpus.trial, training_cfg, context=run_context,
            )
            for _ in range(2)
        ]
        assert digests(runs[0]) == digests(runs[1])
        assert runs[0].dev_pearson_trace == runs[1].dev_pearson_trace
        assert runs[0].train_loss_trace == runs[1].train_loss_trace

    def test_loss_decreases(self, toy_model, synthetic_corpus, run_context):
        cfg = TrainingConfig(lr=1e-3, batch_size=8, max_epochs=5, seed=1)
        checkpoints = train(
            toy_model, synthetic_corpus.train, synthetic_corpus.trial, cfg, context=run_context
        )
        assert checkpoints.train_loss_trace[-1] < checkpoints.train_loss_trace[0]

    def test_snapshots_are_frozen_copies(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        checkpoints = train(
            toy_model, synthetic_corpus.train, synthetic_corpus.trial, training_cfg,
            context=run_context,
        )
        assert len(set(digests(checkpoints))) == 3
        assert checkpoints.initial_digest not in digests(checkpoints)
        assert digests(checkpoints)[-1] == parameter_digest(toy_model)

    def test_feature_enriched_training(
        self, toy_config, synthetic_corpus, feat_context, training_cfg
    ):
        model = init_model(toy_config, feat=True, seed=2)
        checkpoints = train(
            model, synthetic_corpus.train, synthetic_corpus.trial, training_cfg,
            method="feat", context=feat_context,
        )
        assert len(checkpoints) == 3

    def test_adversarial_training(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        checkpoints = train(
            toy_model, synthetic_corpus.train, synthetic_corpus.trial, training_cfg,
            method="adv", adv=AdversarialConfig(), context=run_context,
        )
        assert len(checkpoints) == 3
        assert all(loss == loss for loss in checkpoints.train_loss_trace)

    def test_feat_method_needs_feat_model(
        self, toy_model, synthetic_corpus, feat_context, training_cfg
    ):
        with pytest.raises(ValidationError):
            train(
                toy_model, synthetic_corpus.train, synthetic_corpus.trial, training_cfg,
                method="feat", context=feat_context,
            )

    def test_feat_needs_table(
        self, toy_config, synthetic_corpus, run_context, training_cfg
    ):
        model = init_model(toy_config, feat=True, seed=2)
        with pytest.raises(ValidationError):
            train(
                model, synthetic_corpus.train, synthetic_corpus.trial, training_cfg,
                method="feat", context=run_context,
            )

    def test_empty_training_data(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        empty = make_dataset([], split=Split.TRAIN)
        with pytest.raises(ValidationError):
            train(toy_model, empty, synthetic_corpus.trial, training_cfg, context=run_context)

    def test_unlabeled_training_data(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        unlabeled = synthetic_corpus.train.with_instances(
            i.model_copy(update={"gold": None}) for i in synthetic_corpus.train
        )
        with pytest.raises(ValidationError):
            train(toy_model, unlabeled, synthetic_corpus.trial, training_cfg, context=run_context)

    def test_zero_epochs_rejected(self):
        with pytest.raises(PydanticValidationError):
            TrainingConfig(max_epochs=0)

    def test_predict_split_is_clamped_and_ordered(
        self, toy_model, synthetic_corpus, run_context
    ):
        predictions = predict_split(toy_model, synthetic_corpus.test, run_context)
        assert predictions.ids == synthetic_corpus.test.ids
        assert all(0.0 <= predictions[i] <= 1.0 for i in predictions)


class TestMethodParsing:
    @pytest.mark.parametrize(
        "method, tokens",
        [("standard", {"standard"}), ("feat+adv", {"feat", "adv"}), (" ADV ", {"adv"})],
    )
    def test_valid(self, method, tokens):
        assert parse_method(method) == tokens

    @pytest.mark.parametrize("method", ["", "msft", "feat+sgd"])
    def test_invalid(self, method):
        with pytest.raises(ValidationError):
            parse_method(method)

    def test_step_seeds_are_distinct(self):
        assert len({step_seed(seed, step) for seed in range(3) for step in range(1000)}) == 3000


class TestTrainMsft:
    """Test cases for two-stage fine-tuning."""

    def test_stage_two_starts_from_selected_snapshot(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        half = len(synthetic_corpus.train) // 2
        stage1 = (
            synthetic_corpus.train.with_instances(synthetic_corpus.train.instances[:half]),
            synthetic_corpus.trial,
        )
        stage2 = (
            synthetic_corpus.train.with_instances(synthetic_corpus.train.instances[half:]),
            synthetic_corpus.trial,
        )
        result = train_msft(toy_model, stage1, stage2, training_cfg, context=run_context)

        assert len(result) == training_cfg.max_epochs
        assert result.stage1 is not None and len(result.stage1) == training_cfg.max_epochs
        expected_epoch = select_best(result.stage1, synthetic_corpus.trial).epochs["all"]
        assert result.stage1_epoch == expected_epoch
        assert result.initial_digest == result.stage1.snapshot(expected_epoch).digest

    def test_stage_one_config_override(
        self, toy_model, synthetic_corpus, run_context, training_cfg
    ):
        data = (synthetic_corpus.train, synthetic_corpus.trial)
        result = train_msft(
            toy_model, data, data, training_cfg, context=run_context,
            stage1_cfg=training_cfg.model_copy(update={"max_epochs": 2}),
        )
        assert len(result.stage1) == 2
        assert len(result) == 3

    def test_empty_stage(self, toy_model, synthetic_corpus, run_context, training_cfg):
        empty = make_dataset([], split=Split.TRAIN)
        with pytest.raises(ValidationError):
            train_msft(
                toy_model, (empty, synthetic_corpus.trial),
                (synthetic_corpus.train, synthetic_corpus.trial), training_cfg,
                context=run_context,
            )


class TestTrainMtl:
    """Test cases for shared-encoder multi-task training."""

    def test_single_task_matches_standard_training(
        self, toy_config, synthetic_corpus, run_context, training_cfg
    ):
        data = (synthetic_corpus.train, synthetic_corpus.trial)
        standard = train(
            init_model(toy_config, False, seed=4), *data, training_cfg,
            context=run_context, task="main",
        )
        mtm = init_multitask_model(toy_config, ["main"], False, seed=4)
        multitask = train_mtl(mtm, {"main": data}, training_cfg, context=run_context)["main"]

        assert multitask.dev_pearson_trace == standard.dev_pearson_trace
        assert digests(multitask) == digests(standard)

    def test_heads_are_isolated(
        self, toy_config, synthetic_corpus, run_context, monkeypatch
    ):
        train_data = synthetic_corpus.train
        half = len(train_data) // 2
        tasks = {
            "a": (train_data.with_instances(train_data.instances[:half]), synthetic_corpus.trial),
            "b": (train_data.with_instances(train_data.instances[half:]), synthetic_corpus.trial),
        }
        mtm = init_multitask_model(toy_config, ["a", "b"], False, seed=6)
        records = []
        clip = trainer.clip_parameter_gradients

        def recording_clip(parameters, clip_norm, step=0):
            record = {"encoder": parameter_digest(mtm.encoder)}
            for task in mtm.tasks:
                head = mtm.heads[task]
                stepping = any(p.grad is not None for p in head.parameters())
                record[task] = (parameter_digest(head), stepping)
            records.append(record)
            return clip(parameters, clip_norm, step)

        monkeypatch.setattr(trainer, "clip_parameter_gradients", recording_clip)
        cfg = TrainingConfig(lr=1e-3, batch_size=2, max_epochs=2, seed=8)
        results = train_mtl(mtm, tasks, cfg, context=run_context)

        assert len(records) >= 90
        stepped = set()
        for before, after in zip(records, records[1:]):
            owners = [task for task in ("a", "b") if before[task][1]]
            assert len(owners) == 1
            stepped.add(owners[0])
            other = "b" if owners[0] == "a" else "a"
            assert after[other][0] == before[other][0]
        assert stepped == {"a", "b"}
        assert records[-1]["encoder"] != records[0]["encoder"]
        assert set(results) == {"a", "b"}
        assert all(len(cs) == 2 for cs in results.values())

    def test_empty_task_map(self, toy_config, run_context, training_cfg):
        mtm = init_multitask_model(toy_config, ["a"], False, seed=1)
        with pytest.raises(ValidationError):
            train_mtl(mtm, {}, training_cfg, context=run_context)

    def test_unknown_task(
        self, toy_config, synthetic_corpus, run_context, training_cfg
    ):
        mtm = init_multitask_model(toy_config, ["a"], False, seed=1)
        with pytest.raises(NotFoundError):
            train_mtl(
                mtm, {"b": (synthetic_corpus.train, synthetic_corpus.trial)}, training_cfg,
                context=run_context,
            )

    def test_head_gradients_cleared_between_steps(self, toy_config):
        mtm = init_multitask_model(toy_config, ["a", "b"], False, seed=1)
        ids = torch.tensor([[2, 5, 3]])
        mtm("a", ids, ids != 0).sum().backward()
        mtm.zero_grad(set_to_none=True)
        mtm("b", ids, ids != 0).sum().backward()
        assert all(p.grad is None for p in mtm.heads["a"].parameters())
