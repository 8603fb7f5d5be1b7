import math

import numpy as np
import pytest

import xview


def test_fit_ols_recovers_scaling():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 6))
    model = xview.fit_ols(x, 2.0 * x)
    assert np.allclose(model.weights, 2.0 * np.eye(6), atol=1e-10)
    assert np.allclose(model.map(x), 2.0 * x, atol=1e-9)


def test_fit_ridge_scalar_hand_case():
    x = np.array([[1.0], [2.0], [3.0]])
    y = 2.0 * x
    model = xview.fit_ridge(x, y, 14.0)
    assert model.weights[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_rank_deficient_raises():
    x = np.ones((10, 3))
    with pytest.raises(xview.XviewError):
        xview.fit_ols(x, x)


def test_hoof_hand_case():
    u = np.array([[1.0, 0.0]])
    v = np.array([[0.0, 3.0]])
    h = xview.hoof([(u, v)])
    assert h[0] == pytest.approx(0.25, abs=1e-12)
    assert h[8] == pytest.approx(0.75, abs=1e-12)
    assert h.sum() == pytest.approx(1.0, abs=1e-12)


def test_pca_round_trip():
    rng = np.random.default_rng(1)
    basis = rng.normal(size=(3, 20))
    x = rng.normal(size=(200, 3)) @ basis + 0.5
    model = xview.pca_fit(x, 3)
    z = xview.pca_apply(model, x)
    recon = z @ model.components + model.mean
    assert np.allclose(recon, x, atol=1e-8)


def test_cmc_auc_hand_case():
    curve = xview.cmc([1, 2, 1, 4], 4)
    assert curve == pytest.approx([0.5, 0.75, 0.75, 1.0])
    assert xview.auc(curve) == pytest.approx(75.0)
    assert xview.random_baseline_auc(100) == pytest.approx(50.5)


def test_rank_gallery_pessimistic_ties():
    mapper = xview.fit_ols(np.eye(2), np.eye(2))
    gallery = np.ones((5, 2))
    rank = xview.rank_gallery(mapper, np.zeros(2), gallery, 2)
    assert rank == 5


def test_generate_feature_pairs_deterministic():
    a_ego, a_exo = xview.generate_feature_pairs(seed=7)
    b_ego, b_exo = xview.generate_feature_pairs(seed=7)
    assert np.array_equal(a_ego, b_ego)
    assert np.array_equal(a_exo, b_exo)
    assert a_ego.shape == (7 * 4 * 5, 32)

    c_ego, _ = xview.generate_feature_pairs(seed=8)
    assert not np.array_equal(a_ego, c_ego)


def test_noiseless_linear_pairs_are_linearly_mapped():
    ego, exo = xview.generate_feature_pairs(
        action_count=4, videos_per_action=6, clips_per_video=3,
        noise_sigma=0.0, coupling="linear", seed=3)
    # Noiseless features live in the latent subspace, so OLS would reject
    # the design matrix as rank-deficient; near-zero ridge is equivalent.
    model = xview.fit_ridge(ego[:50], exo[:50], 1e-8)
    assert np.allclose(model.map(ego[50:]), exo[50:], atol=1e-6)


def test_run_synthetic_experiment_shape():
    result = xview.run_synthetic_experiment(seed=5, noise_sigma=0.05)
    assert set(result.keys()) == {"ego2side", "side2ego", "ego2top", "top2ego"}
    for per_model in result.values():
        assert set(per_model.keys()) == {"random", "uniform", "ols"}
        for auc in per_model.values():
            assert 0.0 < auc <= 100.0
        assert per_model["ols"] > per_model["random"] - 20.0
    assert not math.isnan(result["ego2side"]["ols"])
