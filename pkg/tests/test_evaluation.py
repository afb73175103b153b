import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prominence.errors import MetricError
from prominence.evaluation import (
    EvalReport,
    bce_metric,
    evaluate,
    pearson,
    render_table,
)
from prominence.prepare import PreparedUtterance


class TestPearson:
    def test_identity(self):
        assert pearson([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_affine_invariance(self):
        target = np.array([0.1, 0.5, 0.9, 0.3])
        pred = 3.0 * target + 0.7
        assert pearson(pred, target) == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelation(self):
        assert pearson([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_vector_rejected(self):
        with pytest.raises(MetricError):
            pearson([1.0, 1.0, 1.0], [0.0, 0.5, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_too_short(self):
        with pytest.raises(MetricError):
            pearson([1.0], [2.0])

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        a=st.floats(min_value=0.01, max_value=100.0),
        b=st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_scale_invariance_property(self, seed, a, b):
        rng = np.random.default_rng(seed)
        target = rng.random(20)
        pred = rng.random(20)
        base = pearson(pred, target)
        scaled = pearson(a * pred + b, target)
        assert scaled == pytest.approx(base, abs=1e-12)


class TestBceMetric:
    def test_fair_coin_entropy(self):
        value = bce_metric(np.full(5, 0.5), np.full(5, 0.5))
        assert value == pytest.approx(math.log(2.0), abs=1e-9)

    def test_confident_correct(self):
        assert bce_metric([0.9], [1.0]) == pytest.approx(-math.log(0.9), abs=1e-9)

    def test_perfect_confident_prediction_clamps(self):
        value = bce_metric(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        assert 0.0 < value < 2e-6

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            bce_metric([0.5, 0.5], [0.5])

    def test_minimizer_property(self):
        # the target itself minimizes BCE against the target
        rng = np.random.default_rng(8)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            target = rng.random(n)
            pred = rng.random(n)
            assert bce_metric(target, target) <= bce_metric(pred, target) + 1e-12


class TestEvaluate:
    def test_deterministic_and_pooled(self, trained_tiny, tiny_items):
        first = evaluate(trained_tiny.model, tiny_items[24:], dataset_id="tiny")
        second = evaluate(trained_tiny.model, tiny_items[24:], dataset_id="tiny")
        assert first == second
        assert first.word_count == sum(i.n_words for i in tiny_items[24:])
        assert math.isfinite(first.pearson) and math.isfinite(first.bce)

    def test_skips_unannotated(self, trained_tiny, tiny_items):
        items = [
            PreparedUtterance(i.id, i.mel, i.spans, None if k == 0 else i.target)
            for k, i in enumerate(tiny_items[24:28])
        ]
        with pytest.warns(UserWarning, match="skipped 1"):
            report = evaluate(trained_tiny.model, items)
        assert report.skipped_utterances == 1
        assert report.word_count == sum(i.n_words for i in items[1:])

    def test_all_unannotated_rejected(self, trained_tiny, tiny_items):
        items = [PreparedUtterance(i.id, i.mel, i.spans, None) for i in tiny_items[:2]]
        with pytest.warns(UserWarning), pytest.raises(MetricError):
            evaluate(trained_tiny.model, items)

    def test_report_rendering(self):
        report = EvalReport(pearson=0.675, bce=0.337, word_count=931, dataset_id="heldout")
        table = render_table([report])
        assert "heldout" in table and "0.675" in table and "0.337" in table
        parsed = report.to_dict()
        assert parsed["word_count"] == 931
