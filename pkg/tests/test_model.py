import numpy as np
import pytest
import torch

from prominence.corpus import WordSpan
from prominence.errors import ConfigError, SpanError
from prominence.model import (
    LOCATIONS,
    METHODS,
    ModelConfig,
    ProminenceNet,
    downsample,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
    upsample_targets,
)


def brute_force_downsample(features: np.ndarray, bounds, method: str) -> np.ndarray:
    """Independent reference: explicit Python loops, element at a time."""
    C = features.shape[0]
    out = np.zeros((C, len(bounds)), dtype=features.dtype)
    for w, (start, end) in enumerate(bounds):
        for c in range(C):
            if method == "sum":
                acc = features.dtype.type(0)
                for t in range(start, end):
                    acc += features[c, t]
                out[c, w] = acc
            elif method == "average":
                acc = 0.0
                for t in range(start, end):
                    acc += float(features[c, t])
                out[c, w] = acc / (end - start)
            elif method == "max":
                best = features[c, start]
                for t in range(start + 1, end):
                    if features[c, t] > best:
                        best = features[c, t]
                out[c, w] = best
            else:
                out[c, w] = features[c, (start + end - 1) // 2]
    return out


def random_instance(rng, integer_valued: bool):
    n_words = int(rng.integers(1, 8))
    bounds, cursor = [], int(rng.integers(0, 3))
    for _ in range(n_words):
        length = int(rng.integers(1, 12))
        bounds.append((cursor, cursor + length))
        cursor += length + int(rng.integers(0, 4))
    T = cursor + int(rng.integers(0, 3))
    C = int(rng.integers(1, 6))
    if integer_valued:
        features = rng.integers(-1000, 1000, size=(C, max(T, 1))).astype(np.float64)
    else:
        features = rng.normal(size=(C, max(T, 1)))
    return features, bounds


class TestDownsample:
    def test_hand_example(self):
        features = torch.tensor([[0.0, 0.0, 3.0, 5.0, 0.0]])
        assert downsample(features, [(2, 4)], "average").item() == 4.0
        assert downsample(features, [(2, 4)], "max").item() == 5.0
        assert downsample(features, [(2, 4)], "sum").item() == 8.0
        assert downsample(features, [(2, 4)], "center").item() == 3.0

    def test_single_frame_word_all_methods_agree(self):
        rng = np.random.default_rng(0)
        features = rng.normal(size=(4, 10))
        values = [downsample(features, [(3, 4)], m) for m in METHODS]
        for value in values[1:]:
            assert np.array_equal(value, values[0])

    def test_zero_features(self):
        features = np.zeros((3, 12))
        for method in METHODS:
            assert not downsample(features, [(0, 5), (6, 12)], method).any()

    def test_exact_match_with_brute_force(self):
        # Integer-valued floats make every summation order exact, so the
        # comparison is bitwise for sum/max/center.
        rng = np.random.default_rng(123)
        for _ in range(100):
            features, bounds = random_instance(rng, integer_valued=True)
            for method in METHODS:
                reference = brute_force_downsample(features, bounds, method)
                ours = downsample(features, bounds, method)
                if method == "average":
                    assert np.allclose(ours, reference, rtol=1e-6, atol=0.0)
                else:
                    assert np.array_equal(ours, reference)

    def test_float_match_with_brute_force(self):
        rng = np.random.default_rng(321)
        for _ in range(30):
            features, bounds = random_instance(rng, integer_valued=False)
            for method in METHODS:
                reference = brute_force_downsample(features, bounds, method)
                ours = downsample(features, bounds, method)
                assert np.allclose(ours, reference, rtol=1e-12, atol=1e-12)

    def test_span_outside_features(self):
        with pytest.raises(SpanError):
            downsample(np.zeros((2, 5)), [(3, 6)], "sum")

    def test_wordspan_objects_accepted(self):
        features = np.arange(10.0).reshape(1, 10)
        spans = [WordSpan("w", 2, 4)]
        assert downsample(features, spans, "average")[0, 0] == 2.5

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            downsample(np.zeros((1, 4)), [(0, 2)], "median")


class TestUpsample:
    def test_single_word_constant(self):
        frames = upsample_targets(np.array([0.5]), [(0, 4)], 10)
        assert np.allclose(frames, 0.5)

    def test_linear_ramp_midpoint(self):
        # centers at frames 2 and 6 with values 0 and 1
        frames = upsample_targets(np.array([0.0, 1.0]), [(1, 4), (5, 8)], 10)
        assert frames[2] == 0.0 and frames[6] == 1.0
        assert frames[4] == pytest.approx(0.5)

    def test_constant_prominence(self):
        frames = upsample_targets(np.array([0.3, 0.3, 0.3]), [(0, 2), (3, 5), (6, 9)], 12)
        assert np.allclose(frames, 0.3)

    def test_outputs_bounded_by_prominence_range(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            values = rng.random(4)
            frames = upsample_targets(values, [(0, 3), (4, 6), (8, 11), (12, 15)], 18)
            assert frames.min() >= values.min() - 1e-12
            assert frames.max() <= values.max() + 1e-12

    def test_frame_count_too_small(self):
        with pytest.raises(SpanError):
            upsample_targets(np.array([0.5]), [(0, 8)], 6)

    def test_empty_spans_rejected(self):
        with pytest.raises(SpanError):
            upsample_targets(np.array([]), [], 6)
        with pytest.raises(SpanError):
            downsample(np.zeros((1, 6)), [], "sum")


@pytest.fixture(scope="module")
def instance():
    rng = np.random.default_rng(9)
    mel = rng.normal(size=(80, 40)).astype(np.float32)
    spans = [WordSpan("a", 2, 9), WordSpan("b", 11, 20), WordSpan("c", 24, 33)]
    return torch.from_numpy(mel), spans


class TestForward:
    @pytest.mark.parametrize("location", LOCATIONS)
    @pytest.mark.parametrize("method", METHODS)
    def test_shape_contract(self, instance, location, method):
        mel, spans = instance
        net = ProminenceNet(ModelConfig(location=location, method=method))
        out = net(mel, spans)
        expected = mel.shape[1] if location == "framewise" else len(spans)
        assert out.shape == (expected,)
        prominence = net.predict_prominence(mel, spans)
        assert prominence.shape == (len(spans),)

    def test_empty_spans_error(self, instance):
        mel, _ = instance
        net = ProminenceNet(ModelConfig())
        with pytest.raises(SpanError):
            net(mel, [])

    def test_channel_mismatch_error(self, instance):
        _, spans = instance
        net = ProminenceNet(ModelConfig())
        with pytest.raises(ConfigError):
            net(torch.zeros(64, 40), spans)

    @pytest.mark.parametrize("location", LOCATIONS)
    def test_mse_outputs_bounded(self, instance, location):
        mel, spans = instance
        net = ProminenceNet(ModelConfig(location=location, loss="mse"))
        out = net(mel, spans)
        assert out.min() >= 0.0 and out.max() <= 1.0
        prominence = net.predict_prominence(mel, spans)
        assert prominence.min() >= 0.0 and prominence.max() <= 1.0

    def test_constant_input_interior_scores_equal(self):
        # 40 equal-length words in the middle of a long constant input:
        # away from frame- and word-axis padding, scores must be identical.
        torch.manual_seed(0)
        n_words, length, gap = 40, 4, 2
        spans, cursor = [], 30
        for w in range(n_words):
            spans.append(WordSpan(f"w{w}", cursor, cursor + length))
            cursor += length + gap
        T = cursor + 30
        mel = torch.zeros(80, T)
        net = ProminenceNet(ModelConfig(location="intermediate", method="sum"))
        scores = net(mel, spans).detach()
        interior = scores[14:-14]
        assert (interior.max() - interior.min()).abs().item() < 1e-5

    def test_prehoc_receptive_field_isolation(self, instance):
        mel, spans = instance
        torch.manual_seed(1)
        net = ProminenceNet(ModelConfig(location="prehoc", method="average"))
        base = net.word_features(mel, spans).detach()
        perturbed = mel.clone()
        perturbed[:, spans[1].start_frame : spans[1].end_frame] += 3.0
        moved = net.word_features(perturbed, spans).detach()
        assert torch.equal(base[:, 0], moved[:, 0])
        assert torch.equal(base[:, 2], moved[:, 2])
        assert not torch.equal(base[:, 1], moved[:, 1])

    def test_intermediate_lacks_isolation(self, instance):
        # contrast: the intermediate encoder's receptive field crosses words
        mel, spans = instance
        torch.manual_seed(1)
        net = ProminenceNet(ModelConfig(location="intermediate", method="average"))
        base = net.word_features(mel, spans).detach()
        perturbed = mel.clone()
        perturbed[:, spans[1].start_frame : spans[1].end_frame] += 3.0
        moved = net.word_features(perturbed, spans).detach()
        assert not torch.equal(base[:, 2], moved[:, 2])

    def test_parameter_parity_across_locations(self):
        counts = {
            location: parameter_count(ProminenceNet(ModelConfig(location=location)))
            for location in LOCATIONS
        }
        assert len(set(counts.values())) == 1

    def test_batched_matches_solo_for_prehoc(self, instance):
        # prehoc's masked segment batching must equal per-segment processing
        mel, spans = instance
        torch.manual_seed(2)
        net = ProminenceNet(ModelConfig(location="prehoc", method="sum"))
        solo = net(mel, spans).detach()
        bounds = [(s.start_frame, s.end_frame) for s in spans]
        batched = net.forward_batch(
            torch.stack([mel, mel]), [bounds, bounds], [mel.shape[1]] * 2
        ).detach()
        assert torch.allclose(batched[0], solo, atol=1e-6)
        assert torch.allclose(batched[1], solo, atol=1e-6)


class TestCheckpoint:
    def test_roundtrip_preserves_predictions(self, instance, tmp_path):
        mel, spans = instance
        torch.manual_seed(3)
        net = ProminenceNet(ModelConfig(location="posthoc", method="max"))
        net.eval()
        before = net.predict_prominence(mel, spans)
        path = tmp_path / "ckpt.pt"
        save_checkpoint(path, net, step=123, feature_config_hash="abc", extra={"note": 1})
        loaded, metadata = load_checkpoint(path)
        after = loaded.predict_prominence(mel, spans)
        assert np.array_equal(before, after)
        assert metadata["step"] == 123
        assert metadata["feature_config_hash"] == "abc"
        assert metadata["model_config"]["location"] == "posthoc"


class TestModelConfig:
    def test_rejects_unknown_location(self):
        with pytest.raises(ConfigError):
            ModelConfig(location="nowhere")

    def test_rejects_unknown_method(self):
        with pytest.raises(ConfigError):
            ModelConfig(method="median")

    def test_rejects_unknown_loss(self):
        with pytest.raises(ConfigError):
            ModelConfig(loss="huber")

    def test_roundtrip(self):
        config = ModelConfig(location="prehoc", method="center", loss="mse")
        assert ModelConfig.from_dict(config.to_dict()) == config
