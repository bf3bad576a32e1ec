"""Unit tests for ensemble averaging and ensemble specs."""

import json
import random

import pytest

from lcp_toolkit.ensemble import (
    EnsembleMember,
    EnsembleSpec,
    ensemble_average,
    load_ensemble_spec,
    predict_ensemble,
)
from lcp_toolkit.evaluation import PredictionSet, write_predictions
from lcp_toolkit.inference import predict_with_bundle
from lcp_toolkit.persistence import load_bundle
from lcp_toolkit.utils.errors import ConfigError, NotFoundError, ValidationError


def single(score, instance_id="x"):
    return PredictionSet(scores={instance_id: score})


@pytest.fixture
def members():
    rng = random.Random(5)
    ids = [f"i{k}" for k in range(20)]
    return [PredictionSet(scores={i: rng.random() for i in ids}) for _ in range(5)]


class TestEnsembleAverage:
    """Test cases for per-id averaging."""

    def test_two_members(self):
        assert ensemble_average([single(0.2), single(0.4)])["x"] == pytest.approx(0.3)

    def test_three_members(self):
        average = ensemble_average([single(0.1), single(0.2), single(0.6)])
        assert average["x"] == pytest.approx(0.3)

    def test_single_member_is_identity(self, members):
        assert ensemble_average(members[:1]) == members[0]

    def test_idempotent(self, members):
        average = ensemble_average([members[0]] * 3)
        for instance_id in members[0]:
            assert average[instance_id] == pytest.approx(members[0][instance_id], abs=1e-15)

    def test_order_independent(self, members):
        shuffled = list(reversed(members))
        random.Random(1).shuffle(shuffled)
        assert ensemble_average(shuffled) == ensemble_average(members)

    def test_repeated_member_weights(self, members):
        a, b = members[0], members[1]
        average = ensemble_average([a, a, b])
        for instance_id in a:
            expected = (2 * a[instance_id] + b[instance_id]) / 3
            assert average[instance_id] == pytest.approx(expected, abs=1e-12)

    def test_result_keeps_first_member_order(self, members):
        assert ensemble_average(members).ids == members[0].ids

    def test_id_mismatch(self):
        with pytest.raises(ValidationError):
            ensemble_average([single(0.2), single(0.4, instance_id="y")])

    def test_no_members(self):
        with pytest.raises(ValidationError):
            ensemble_average([])


class TestEnsembleSpec:
    def test_member_needs_one_source(self):
        with pytest.raises(ValidationError):
            EnsembleMember()
        with pytest.raises(ValidationError):
            EnsembleMember(predictions="a.csv", checkpoint="bundle")

    def test_routing_must_cover_domains(self):
        with pytest.raises(ValidationError):
            EnsembleMember(routing={"europarl": "a", "biomed": "b"})

    def test_empty_spec(self):
        with pytest.raises(ValidationError):
            EnsembleSpec(members=[])

    def test_reference(self):
        assert EnsembleMember(name="roberta", predictions="p.csv").reference == "roberta"
        assert EnsembleMember(checkpoint="runs/b").reference == "runs/b"

    def test_relative_paths_resolve_against_spec(self, tmp_path):
        spec_dir = tmp_path / "specs"
        spec_dir.mkdir()
        path = spec_dir / "ensemble.json"
        path.write_text(
            json.dumps(
                {
                    "members": [
                        {"predictions": "a.csv"},
                        {
                            "routing": {
                                "europarl": "b1",
                                "biomed": "/abs/b2",
                                "bible": "b1",
                            }
                        },
                    ]
                }
            )
        )
        spec = load_ensemble_spec(path)
        assert spec.members[0].predictions == str(spec_dir / "a.csv")
        assert spec.members[1].routing["europarl"] == str(spec_dir / "b1")
        assert spec.members[1].routing["biomed"] == "/abs/b2"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "ensemble.json"
        path.write_text("{members: ")
        with pytest.raises(ConfigError):
            load_ensemble_spec(path)

    def test_missing_spec(self, tmp_path):
        with pytest.raises(NotFoundError):
            load_ensemble_spec(tmp_path / "absent.json")


class TestPredictEnsemble:
    """Test cases for ensembles over files and bundles."""

    def test_prediction_files(self, tmp_path, tiny_dataset):
        first = PredictionSet(scores={i: 0.2 for i in tiny_dataset.ids})
        second = PredictionSet(scores={i: 0.4 for i in tiny_dataset.ids})
        spec = EnsembleSpec(
            members=[
                EnsembleMember(predictions=str(write_predictions(first, tmp_path / "a.csv"))),
                EnsembleMember(predictions=str(write_predictions(second, tmp_path / "b.csv"))),
            ]
        )
        average = predict_ensemble(spec, tiny_dataset)
        assert average.ids == tiny_dataset.ids
        assert all(average[i] == pytest.approx(0.3) for i in average)

    def test_extra_ids_in_files_are_ignored(self, tmp_path, tiny_dataset):
        scores = {i: 0.5 for i in tiny_dataset.ids}
        scores["unrelated"] = 0.9
        path = write_predictions(PredictionSet(scores=scores), tmp_path / "a.csv")
        spec = EnsembleSpec(members=[EnsembleMember(predictions=str(path))])
        assert predict_ensemble(spec, tiny_dataset).ids == tiny_dataset.ids

    def test_bundle_members(self, tmp_path, bundle_dir, synthetic_corpus):
        direct = predict_with_bundle(load_bundle(bundle_dir), synthetic_corpus.test)
        saved = write_predictions(direct, tmp_path / "direct.csv")
        spec = EnsembleSpec(
            members=[
                EnsembleMember(checkpoint=str(bundle_dir)),
                EnsembleMember(predictions=str(saved)),
                EnsembleMember(
                    routing={d: str(bundle_dir) for d in ("europarl", "biomed", "bible")}
                ),
            ]
        )
        average = predict_ensemble(spec, synthetic_corpus.test)
        for instance_id in direct:
            assert average[instance_id] == pytest.approx(direct[instance_id], abs=1e-15)

    def test_member_failure_names_member(self, tmp_path, tiny_dataset):
        complete = write_predictions(
            PredictionSet(scores={i: 0.5 for i in tiny_dataset.ids}), tmp_path / "a.csv"
        )
        partial = write_predictions(
            PredictionSet(scores={i: 0.5 for i in tiny_dataset.ids[1:]}), tmp_path / "b.csv"
        )
        spec = EnsembleSpec(
            members=[
                EnsembleMember(predictions=str(complete)),
                EnsembleMember(name="partial", predictions=str(partial)),
            ]
        )
        with pytest.raises(NotFoundError, match="ensemble member 2 \\(partial\\)"):
            predict_ensemble(spec, tiny_dataset)
