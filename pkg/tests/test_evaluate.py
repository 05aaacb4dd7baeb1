import numpy as np
import pytest

from googlenet import evaluate, graph as G, imaging, nets
from googlenet.errors import ShapeError
from googlenet.evaluate import EnsembleConfig, Metrics, metrics, predict, topk_error


@pytest.fixture(scope="module")
def tiny_models():
    g = nets.build_googlenet_mini(16, 7, with_aux=False)
    return [(g, G.init_params(g, seed=s)) for s in (0, 1)]


@pytest.fixture(scope="module")
def image():
    rng = np.random.default_rng(42)
    return rng.random((260, 300, 3), dtype=np.float32)


class TestEnsembleConfig:
    def test_cost_structure_matches_published_breakdown(self):
        costs = []
        for n_models in (1, 7):
            for mode in ("c1", "c10", "c144"):
                cfg = EnsembleConfig(tuple(f"m{i}" for i in range(n_models)), crop_mode=mode)
                costs.append(cfg.cost)
        assert costs == [1, 10, 144, 7, 70, 1008]

    def test_validation(self):
        with pytest.raises(ValueError, match="at least one"):
            EnsembleConfig(())
        with pytest.raises(ValueError, match="crop mode"):
            EnsembleConfig(("m",), crop_mode="c7")
        with pytest.raises(ValueError, match="pooling"):
            EnsembleConfig(("m",), pooling="median")


class TestPredict:
    def test_single_model_c1_equals_direct_forward(self, tiny_models, image):
        model = tiny_models[:1]
        got = predict(model, image, crop_mode="c1")
        (_, crop), = imaging.enumerate_crops(image, "c1")
        want = G.forward(*model[0], imaging.mean_subtract(crop, (0, 0, 0)), mode="infer")["main"][0]
        np.testing.assert_array_equal(got, want)

    def test_mean_pooling_sums_to_one(self, tiny_models, image):
        out = predict(tiny_models, image, crop_mode="c10")
        np.testing.assert_allclose(out.sum(), 1.0, atol=1e-5)

    def test_permutation_invariance_bitwise(self, tiny_models, image):
        a = predict(tiny_models, image, crop_mode="c10")
        b = predict(tiny_models[::-1], image, crop_mode="c10")
        np.testing.assert_array_equal(a, b)

    def test_duplication_idempotent_bitwise(self, tiny_models, image):
        one = predict(tiny_models[:1], image, crop_mode="c10")
        two = predict([tiny_models[0], tiny_models[0]], image, crop_mode="c10")
        np.testing.assert_array_equal(one, two)

    def test_identical_parameter_ensembles_match_single(self, tiny_models, image):
        g, p = tiny_models[0]
        clones = [(g, p), (g, {k: v.copy() for k, v in p.items()})]
        np.testing.assert_array_equal(
            predict(clones, image, crop_mode="c1"), predict(clones[:1], image, crop_mode="c1")
        )

    def test_maxcrop_pooling_selectable(self, tiny_models, image):
        mean_pooled = predict(tiny_models, image, crop_mode="c10", pooling="mean")
        max_pooled = predict(tiny_models, image, crop_mode="c10", pooling="maxcrop")
        assert max_pooled.shape == mean_pooled.shape
        # per class, a max over crops dominates the mean over crops
        assert (max_pooled >= mean_pooled - 1e-7).all()
        assert not np.array_equal(mean_pooled, max_pooled)

    def test_class_count_mismatch_rejected(self, tiny_models, image):
        other = nets.build_googlenet_mini(16, 9, with_aux=False)
        mixed = [tiny_models[0], (other, G.init_params(other, 0))]
        with pytest.raises(ShapeError, match="class count"):
            predict(mixed, image, crop_mode="c1")

    def test_two_opposed_models_average_to_half(self, image, monkeypatch):
        # stub models: identity graphs whose "forward" yields fixed one-hots
        g = nets.build_googlenet_mini(16, 2, with_aux=False)
        p = G.init_params(g, 0)
        outs = {0: np.array([1.0, 0.0], np.float32), 1: np.array([0.0, 1.0], np.float32)}
        calls = {"i": 0}

        def fake_forward(graph, params, batch, mode="infer", **kw):
            probs = np.tile(outs[calls["i"] % 2], (len(batch), 1))
            calls["i"] += 1
            return {"main": probs}

        monkeypatch.setattr(evaluate.graph_mod, "forward", fake_forward)
        out = predict([(g, p), (g, p)], image, crop_mode="c1")
        np.testing.assert_array_equal(out, [0.5, 0.5])


class TestTopK:
    def test_rank_one_counts_for_both(self):
        preds = np.array([[0.7, 0.2, 0.1]])
        m = metrics(preds, np.array([0]))
        assert m == Metrics(top1_error=0.0, top5_error=0.0, n_examples=1)

    def test_rank_five_boundary(self):
        row = np.linspace(1.0, 0.001, 1000)
        label_rank5 = np.argsort(-row, kind="stable")[4]
        assert topk_error(row[None], np.array([label_rank5]), 1) == 1.0
        assert topk_error(row[None], np.array([label_rank5]), 5) == 0.0

    def test_fixture_counts(self, rng):
        # four examples whose true label sits at rank 1, 3, 6, 2
        n_classes = 10
        preds, labels = [], []
        for rank in (1, 3, 6, 2):
            scores = np.linspace(1.0, 0.1, n_classes)
            order = rng.permutation(n_classes)
            row = np.empty(n_classes)
            row[order] = scores  # order[i] has rank i+1
            preds.append(row)
            labels.append(order[rank - 1])
        m = metrics(np.array(preds), np.array(labels))
        assert m.top1_error == 0.75
        assert m.top5_error == 0.25

    def test_monotone_in_k(self, rng):
        preds = rng.random((64, 20))
        labels = rng.integers(0, 20, 64)
        errors = [topk_error(preds, labels, k) for k in range(1, 8)]
        assert all(a >= b for a, b in zip(errors, errors[1:]))

    def test_ties_break_toward_lower_class_index(self):
        preds = np.array([[0.5, 0.5, 0.0]])
        assert topk_error(preds, np.array([0]), 1) == 0.0
        assert topk_error(preds, np.array([1]), 1) == 1.0

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            topk_error(np.zeros((0, 5)), np.zeros(0, dtype=int), 1)

    def test_metrics_invariant(self, rng):
        preds = rng.random((32, 11))
        labels = rng.integers(0, 11, 32)
        m = metrics(preds, labels)
        assert 0.0 <= m.top5_error <= m.top1_error <= 1.0
