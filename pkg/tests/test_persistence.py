"""Unit tests for checkpoints, bundles and bundle-based prediction."""

import dataclasses
import json

import pytest
import torch
from conftest import MAX_LEN, make_dataset

from lcp_toolkit.corpus import Split, Subtask, partition_by_domain
from lcp_toolkit.encoding import build_vocab, save_vocab
from lcp_toolkit.inference import group_by_route, predict_with_bundle, route_by_domain
from lcp_toolkit.model import init_model
from lcp_toolkit.persistence import (
    BUNDLE_MANIFEST,
    BUNDLE_VOCAB,
    load_bundle,
    load_checkpoint,
    parameter_digest,
    save_checkpoint,
    validate_routing,
    write_bundle,
)
from lcp_toolkit.training import predict_split
from lcp_toolkit.utils.errors import DataError, NotFoundError, ValidationError


class TestParameterDigest:
    def test_module_and_state_agree(self, toy_model):
        assert parameter_digest(toy_model) == parameter_digest(toy_model.state_dict())

    def test_any_change_is_visible(self, toy_model):
        before = parameter_digest(toy_model)
        with torch.no_grad():
            next(toy_model.parameters()).view(-1)[0] += 1e-12
        assert parameter_digest(toy_model) != before

    def test_same_seed_same_digest(self, toy_config):
        assert parameter_digest(init_model(toy_config, False, seed=3)) == parameter_digest(
            init_model(toy_config, False, seed=3)
        )


class TestCheckpoints:
    def test_round_trip(self, tmp_path, toy_model, toy_meta, synthetic_corpus, run_context):
        path = save_checkpoint(toy_model.state_dict(), toy_meta, tmp_path / "model.pt")
        loaded = load_checkpoint(path)

        assert parameter_digest(loaded.model) == parameter_digest(toy_model)
        assert loaded.meta.epoch == 1
        assert loaded.meta.encoder == toy_meta.encoder
        assert predict_split(loaded.model, synthetic_corpus.test, run_context) == predict_split(
            toy_model, synthetic_corpus.test, run_context
        )

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "model.pt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(NotFoundError):
            load_checkpoint(tmp_path / "absent.pt")


class TestBundles:
    """Test cases for writing, loading and predicting with bundles."""

    def test_single_model_bundle(self, bundle_dir, toy_model, synthetic_corpus, run_context):
        bundle = load_bundle(bundle_dir)

        assert not bundle.routed
        assert not bundle.feat
        assert bundle.subtask is Subtask.SINGLE_WORD
        assert bundle.max_len == MAX_LEN
        assert predict_with_bundle(bundle, synthetic_corpus.test) == predict_split(
            toy_model, synthetic_corpus.test, run_context
        )

    def test_manifest_contents(self, bundle_dir):
        manifest = json.loads((bundle_dir / BUNDLE_MANIFEST).read_text())
        assert manifest["routing"] == {"all": "model.pt"}
        assert manifest["frequencies"] is None
        assert manifest["epochs"] == {"all": 1}

    def test_routed_bundle_shares_files(
        self, tmp_path, toy_config, toy_meta, synthetic_vocab, synthetic_corpus, run_context
    ):
        first = init_model(toy_config, False, seed=1)
        second = init_model(toy_config, False, seed=2)
        states = {
            "europarl": first.state_dict(),
            "biomed": second.state_dict(),
            "bible": first.state_dict(),
        }
        out = write_bundle(
            tmp_path / "routed",
            subtask=Subtask.SINGLE_WORD,
            max_len=MAX_LEN,
            vocab=synthetic_vocab,
            states=states,
            metas={key: toy_meta for key in states},
        )

        assert sorted(p.name for p in out.glob("*.pt")) == ["model_biomed.pt", "model_europarl.pt"]
        bundle = load_bundle(out)
        assert bundle.routed
        assert bundle.models["bible"] is bundle.models["europarl"]

        predictions = predict_with_bundle(bundle, synthetic_corpus.test)
        assert predictions.ids == synthetic_corpus.test.ids
        for domain, part in partition_by_domain(synthetic_corpus.test).items():
            model = first if domain.value != "biomed" else second
            expected = predict_split(model, part, run_context)
            for instance_id in part.ids:
                assert predictions[instance_id] == pytest.approx(expected[instance_id], abs=1e-12)

    def test_incomplete_routing(self, tmp_path, toy_model, toy_meta, synthetic_vocab):
        with pytest.raises(ValidationError):
            write_bundle(
                tmp_path / "bad",
                subtask=Subtask.SINGLE_WORD,
                max_len=MAX_LEN,
                vocab=synthetic_vocab,
                states={"europarl": toy_model.state_dict(), "biomed": toy_model.state_dict()},
                metas={"europarl": toy_meta, "biomed": toy_meta},
            )

    def test_feature_bundle_needs_table(self, tmp_path, toy_config, toy_meta, synthetic_vocab):
        model = init_model(toy_config, True, seed=1)
        meta = dataclasses.replace(toy_meta, feat=True)
        with pytest.raises(ValidationError):
            write_bundle(
                tmp_path / "feat",
                subtask=Subtask.SINGLE_WORD,
                max_len=MAX_LEN,
                vocab=synthetic_vocab,
                states={"all": model.state_dict()},
                metas={"all": meta},
            )

    def test_vocabulary_mismatch(self, bundle_dir, synthetic_mwe_corpus):
        save_vocab(build_vocab(synthetic_mwe_corpus.train), bundle_dir / BUNDLE_VOCAB)
        with pytest.raises(DataError):
            load_bundle(bundle_dir)

    def test_missing_bundle(self, tmp_path):
        with pytest.raises(NotFoundError):
            load_bundle(tmp_path / "nowhere")

    def test_empty_dataset(self, bundle_dir):
        predictions = predict_with_bundle(load_bundle(bundle_dir), make_dataset([]))
        assert len(predictions) == 0

    def test_subtask_mismatch(self, bundle_dir, synthetic_mwe_corpus):
        with pytest.raises(ValidationError):
            predict_with_bundle(load_bundle(bundle_dir), synthetic_mwe_corpus.test)


class TestRouting:
    def test_validate_routing(self):
        routing = {"europarl": "a", "biomed": "b", "bible": "a"}
        assert validate_routing(routing) == routing
        with pytest.raises(ValidationError):
            validate_routing({"europarl": "a", "biomed": "b"})
        with pytest.raises(ValidationError):
            validate_routing({**routing, "news": "c"})

    def test_route_by_domain(self, synthetic_corpus):
        instance = synthetic_corpus.test[0]
        assert route_by_domain({instance.domain.value: "x"}, instance) == "x"
        with pytest.raises(NotFoundError):
            route_by_domain({}, instance)

    def test_group_by_route_merges_shared_variants(self, tiny_dataset):
        shared, other = object(), object()
        groups = group_by_route({"europarl": shared, "bible": shared, "biomed": other}, tiny_dataset)
        assert len(groups) == 2
        sizes = {id(variant): len(part) for variant, part in groups}
        assert sizes == {id(shared): 8, id(other): 4}
        assert all(part.split is Split.TEST for _, part in groups)
