"""Unit tests for the metrics, reports and analysis exports."""

import math

import numpy as np
import pandas as pd
import pytest
from conftest import make_dataset, make_instance

from lcp_toolkit.corpus import partition_by_domain
from lcp_toolkit.evaluation import (
    PredictionSet,
    compute_metrics,
    evaluate,
    export_analysis,
    histogram_counts,
    histogram_edges,
    mae,
    mse,
    pearson,
    r2,
    read_predictions,
    spearman,
    write_predictions,
)
from lcp_toolkit.utils.errors import DataError, MetricError, NotFoundError, ValidationError


def oracle_pearson(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def oracle_ranks(x):
    ranks = [0.0] * len(x)
    for i, a in enumerate(x):
        below = sum(1 for b in x if b < a)
        equal = sum(1 for b in x if b == a)
        ranks[i] = below + (equal + 1) / 2
    return ranks


def random_cases(count=100, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, 501))
        yield rng.random(n).tolist(), rng.random(n).tolist()


def labeled(golds, domains=("europarl", "biomed", "bible")):
    return make_dataset(
        make_instance(f"i{k:03d}", domain=domains[k % len(domains)], gold=g)
        for k, g in enumerate(golds)
    )


class TestPearson:
    def test_perfect(self):
        assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_anti(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_formula(self):
        pred = [0.1, 0.4, 0.2, 0.8]
        gold = [0.2, 0.5, 0.1, 0.9]
        assert pearson(pred, gold) == pytest.approx(oracle_pearson(pred, gold), abs=1e-12)

    @pytest.mark.parametrize("pred, gold", [([0.3, 0.3, 0.3], [0.1, 0.2, 0.3]), ([0.1, 0.2], [0.5, 0.5])])
    def test_zero_variance(self, pred, gold):
        with pytest.raises(MetricError):
            pearson(pred, gold)

    def test_too_short(self):
        with pytest.raises(MetricError):
            pearson([0.1], [0.2])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            pearson([0.1, 0.2], [0.2, 0.3, 0.4])


class TestSpearman:
    def test_monotone(self):
        assert spearman([1, 2, 3], [1, 4, 9]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [9, 4, 1]) == pytest.approx(-1.0)

    def test_ties_use_average_ranks(self):
        assert spearman([1, 1, 2], [1, 2, 3]) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(MetricError):
            spearman([0.4, 0.4, 0.4], [0.1, 0.2, 0.3])


class TestErrorMetrics:
    def test_identical(self):
        assert mae([0.2, 0.7], [0.2, 0.7]) == 0.0
        assert mse([0.2, 0.7], [0.2, 0.7]) == 0.0

    def test_swapped(self):
        assert mae([0, 1], [1, 0]) == 1.0
        assert mse([0, 1], [1, 0]) == 1.0

    def test_empty(self):
        with pytest.raises(MetricError):
            mae([], [])

    def test_r2_examples(self):
        gold = [0.1, 0.3, 0.8]
        assert r2(gold, gold) == 1.0
        mean = sum(gold) / 3
        assert r2([mean] * 3, gold) == pytest.approx(0.0, abs=1e-12)
        assert r2([1, 0], [0, 1]) == pytest.approx(-3.0)

    def test_r2_constant_gold(self):
        with pytest.raises(MetricError):
            r2([0.1, 0.2], [0.4, 0.4])


class TestMetricOracles:
    """Random-vector agreement with direct formulas."""

    def test_pearson(self):
        for pred, gold in random_cases():
            assert abs(pearson(pred, gold) - oracle_pearson(pred, gold)) <= 1e-10

    def test_spearman(self):
        for pred, gold in random_cases(count=30, seed=1):
            expected = oracle_pearson(oracle_ranks(pred), oracle_ranks(gold))
            assert abs(spearman(pred, gold) - expected) <= 1e-10

    def test_errors_and_r2(self):
        for pred, gold in random_cases(seed=2):
            n = len(gold)
            expected_mae = math.fsum(abs(p - g) for p, g in zip(pred, gold)) / n
            expected_mse = math.fsum((p - g) ** 2 for p, g in zip(pred, gold)) / n
            mean = math.fsum(gold) / n
            variance = math.fsum((g - mean) ** 2 for g in gold) / n
            assert abs(mae(pred, gold) - expected_mae) <= 1e-10
            assert abs(mse(pred, gold) - expected_mse) <= 1e-10
            assert abs(r2(pred, gold) - (1 - expected_mse / variance)) <= 1e-10


class TestMetricInvariances:
    def test_pearson_affine(self):
        for pred, gold in random_cases(seed=3):
            base = pearson(pred, gold)
            scaled = [3.5 * p - 0.25 for p in pred]
            assert abs(pearson(scaled, gold) - base) <= 1e-9
            assert abs(pearson([-p for p in pred], gold) + base) <= 1e-9

    def test_spearman_monotone(self):
        for pred, gold in random_cases(count=30, seed=4):
            transformed = [math.exp(5 * p) for p in pred]
            assert spearman(transformed, gold) == pytest.approx(spearman(pred, gold), abs=1e-12)

    def test_mae_below_rmse_and_r2_identity(self):
        for pred, gold in random_cases(seed=5):
            assert mae(pred, gold) <= math.sqrt(mse(pred, gold)) + 1e-12
            variance = float(np.var(np.asarray(gold)))
            assert abs(r2(pred, gold) - (1 - mse(pred, gold) / variance)) <= 1e-12
            assert r2(pred, gold) <= 1.0


class TestEvaluate:
    """Test cases for whole-set and per-domain reports."""

    def test_perfect_predictions(self, tiny_dataset):
        report = evaluate(PredictionSet(scores={i.id: i.gold for i in tiny_dataset}), tiny_dataset)
        assert report.pearson == pytest.approx(1.0)
        assert report.spearman == pytest.approx(1.0)
        assert report.mae == 0.0
        assert report.mse == 0.0
        assert report.r2 == 1.0
        assert report.count == 12
        assert set(report.per_domain) == {"europarl", "biomed", "bible"}

    def test_per_domain_matches_partitions(self):
        rng = np.random.default_rng(11)
        gold = labeled(np.round(rng.random(30), 4).tolist())
        predictions = PredictionSet(scores={i.id: float(rng.random()) for i in gold})

        report = evaluate(predictions, gold)

        for domain, part in partition_by_domain(gold).items():
            expected = compute_metrics(
                [predictions[i.id] for i in part], [i.gold for i in part]
            )
            assert report.per_domain[domain.value] == expected

    def test_small_domain_reports_none(self):
        gold = make_dataset(
            [
                make_instance("a", domain="europarl", gold=0.1),
                make_instance("b", domain="europarl", gold=0.4),
                make_instance("c", domain="bible", gold=0.6),
            ]
        )
        predictions = PredictionSet(scores={"a": 0.2, "b": 0.3, "c": 0.5})
        report = evaluate(predictions, gold)
        assert report.per_domain["europarl"] is not None
        assert report.per_domain["bible"] is None
        assert report.per_domain["biomed"] is None

        cells = report.to_tsv_line().split("\t")
        assert len(cells) == 24
        assert cells[:1] == ["3"]
        assert cells[12:] == ["NA"] * 12

    def test_json_round_trip(self, tiny_dataset):
        report = evaluate(PredictionSet(scores={i.id: i.gold for i in tiny_dataset}), tiny_dataset)
        assert type(report).model_validate_json(report.to_json()) == report

    def test_missing_prediction(self, tiny_dataset):
        scores = {i.id: i.gold for i in tiny_dataset}
        scores.pop("t03")
        with pytest.raises(NotFoundError):
            evaluate(PredictionSet(scores=scores), tiny_dataset)

    def test_undefined_whole_set(self, tiny_dataset):
        with pytest.raises(MetricError):
            evaluate(PredictionSet(scores={i: 0.5 for i in tiny_dataset.ids}), tiny_dataset)


class TestPredictionFiles:
    def test_round_trip_is_exact(self, tmp_path):
        predictions = PredictionSet(scores={"a": 0.1, "b": 1 / 3, "c": 1.0})
        path = write_predictions(predictions, tmp_path / "preds.csv")
        assert path.read_text().splitlines()[0] == "id,prediction"
        assert read_predictions(path) == predictions

    def test_out_of_range_scores(self):
        with pytest.raises(ValidationError):
            PredictionSet(scores={"a": 1.2})

    @pytest.mark.parametrize(
        "content",
        [
            "id,score\na,0.1\n",
            "id,prediction\na,0.1\na,0.2\n",
            "id,prediction\na,1.5\n",
            "id,prediction\na,high\n",
        ],
    )
    def test_invalid_files(self, tmp_path, content):
        path = tmp_path / "preds.csv"
        path.write_text(content)
        with pytest.raises(DataError):
            read_predictions(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(NotFoundError):
            read_predictions(tmp_path / "absent.csv")


class TestExportAnalysis:
    def test_row_counts(self, tmp_path):
        rng = np.random.default_rng(3)
        gold = labeled(np.round(rng.random(30), 4).tolist())
        predictions = PredictionSet(scores={i.id: float(rng.random()) for i in gold})

        written = export_analysis(predictions, gold, tmp_path / "analysis")

        scatter = pd.read_csv(written["scatter"])
        histogram = pd.read_csv(written["histogram"])
        per_domain = pd.read_csv(written["per_domain"])
        assert list(scatter.columns) == ["id", "domain", "prediction", "gold"]
        assert len(scatter) == 30
        assert len(histogram) == 20
        assert histogram["prediction_count"].sum() == 30
        assert histogram["gold_count"].sum() == 30
        assert per_domain["count"].sum() == 30

    def test_constant_predictions_fill_one_bin(self, tmp_path, tiny_dataset):
        predictions = PredictionSet(scores={i: 0.5 for i in tiny_dataset.ids})
        written = export_analysis(predictions, tiny_dataset, tmp_path)
        histogram = pd.read_csv(written["histogram"])
        row = histogram[histogram["prediction_count"] > 0]
        assert len(row) == 1
        assert row["bin_start"].iloc[0] == pytest.approx(0.5)
        assert row["bin_end"].iloc[0] == pytest.approx(0.55)
        assert row["prediction_count"].iloc[0] == 12

    def test_unlabeled_gold(self, tmp_path):
        gold = make_dataset([make_instance("a", gold=None)])
        with pytest.raises(ValidationError):
            export_analysis(PredictionSet(scores={"a": 0.2}), gold, tmp_path)

    @pytest.mark.parametrize("k", range(21))
    def test_edge_value_opens_its_bin(self, tmp_path, k):
        score = round(k * 0.05, 2)
        gold = make_dataset([make_instance("h", gold=score)])
        predictions = PredictionSet(scores={"h": k * 0.05})
        written = export_analysis(predictions, gold, tmp_path)
        histogram = pd.read_csv(written["histogram"])

        expected = min(k, 19)
        for column in ("prediction_count", "gold_count"):
            counts = histogram[column].tolist()
            assert counts[expected] == 1
            assert sum(counts) == 1

    def test_edges_are_exact_multiples(self):
        assert histogram_edges().tolist() == [k / 20 for k in range(21)]

    def test_counts_are_half_open(self):
        counts = histogram_counts([0.0, 0.1, 0.0999, 0.3, 0.95, 1.0], 0.05)
        assert len(counts) == 20
        assert counts[0] == 1
        assert counts[1] == 1
        assert counts[2] == 1
        assert counts[6] == 1
        assert counts[19] == 2

    def test_bin_width_must_divide_unit_interval(self):
        assert len(histogram_edges(0.1)) == 11
        with pytest.raises(ValidationError):
            histogram_edges(0.3)
