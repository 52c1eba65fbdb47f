"""Scoring and gradient checks: loop oracles and central finite differences."""

import numpy as np
import pytest

from affinitykg.models import (
    ClampStats,
    DropoutSpec,
    bce_loss,
    grad_tucker,
    init_baseline,
    init_params,
    loss_and_grads,
    predict_sigmoid,
    relation_matrix,
    sample_masks,
    score_all_tails,
    score_baseline,
    score_tucker,
    smooth_labels,
)


def score_oracle(params, h, r, t):
    """Triple-loop contraction, independent of the vectorized path."""
    acc = 0.0
    E, R, G = params.E, params.R, params.G
    for p in range(G.shape[0]):
        for q in range(G.shape[1]):
            for j in range(G.shape[2]):
                acc += G[p, q, j] * E[h, p] * R[r, q] * E[t, j]
    return acc


class TestInit:
    def test_deterministic_per_seed(self):
        a = init_params(5, 4, 3, 2, seed=77)
        b = init_params(5, 4, 3, 2, seed=77)
        for name, arr in a.param_blocks().items():
            np.testing.assert_array_equal(arr, b.param_blocks()[name])

    def test_ranges(self):
        p = init_params(50, 10, 8, 4, seed=0)
        assert np.all(np.abs(p.E) <= 0.1) and np.all(np.abs(p.R) <= 0.1)
        assert np.all(np.abs(p.G) <= 1.0)

    def test_embedding_mean_near_zero(self):
        p = init_params(2000, 10, 50, 4, seed=1)
        draws = p.E.ravel()
        sigma = (0.2 / np.sqrt(12)) / np.sqrt(draws.size)
        assert abs(draws.mean()) < 3 * sigma

    def test_core_shape_enforced(self):
        with pytest.raises(ValueError):
            init_params(0, 1, 1, 1, seed=0)


class TestScoreTucker:
    def test_basis_contraction(self):
        G = np.zeros((2, 1, 2))
        G[0, 0, 0] = 1.0
        params = init_params(2, 1, 2, 1, seed=0)
        params.G[:] = G
        params.E[:] = [[1.0, 0.0], [1.0, 0.0]]
        params.R[:] = [[1.0]]
        assert score_tucker(params, 0, 0, 1) == pytest.approx(1.0)

    def test_zero_core_scores_zero(self):
        params = init_params(4, 2, 3, 2, seed=1)
        params.G[:] = 0.0
        for h in range(4):
            assert score_tucker(params, h, 0, (h + 1) % 4) == 0.0

    def test_matches_loop_oracle(self):
        params = init_params(6, 3, 4, 2, seed=3)
        rng = np.random.default_rng(0)
        for _ in range(20):
            h, t = rng.integers(0, 6, size=2)
            r = int(rng.integers(0, 3))
            assert score_tucker(params, int(h), r, int(t)) == pytest.approx(
                score_oracle(params, int(h), r, int(t)), abs=1e-12
            )

    def test_id_out_of_range(self):
        params = init_params(3, 2, 2, 2, seed=0)
        with pytest.raises(IndexError):
            score_tucker(params, 3, 0, 0)


class TestScoreAllTails:
    def test_consistent_with_pointwise(self):
        params = init_params(50, 4, 8, 3, seed=5)
        for h, r in ((0, 0), (10, 3), (49, 2)):
            batched = score_all_tails(params, h, r)
            pointwise = np.array([score_tucker(params, h, r, t) for t in range(50)])
            assert np.max(np.abs(batched - pointwise)) < 1e-12

    def test_one_hot_entities_pick_core_rows(self):
        params = init_params(3, 1, 3, 1, seed=0)
        params.E[:] = np.eye(3)
        params.R[:] = [[1.0]]
        M = params.G[:, 0, :]
        scores = score_all_tails(params, 0, 0)
        np.testing.assert_allclose(scores, M[0], atol=1e-12)

    def test_same_mask_as_score_tucker(self):
        params = init_params(12, 4, 6, 3, seed=9)
        masks = sample_masks(DropoutSpec(0.5, 0.2, 0.2), params.d_e, np.random.default_rng(4))
        batched = score_all_tails(params, 2, 1, masks)
        pointwise = np.array([score_tucker(params, 2, 1, t, masks) for t in range(12)])
        assert np.max(np.abs(batched - pointwise)) < 1e-12


class TestDropout:
    def test_rate_zero_is_identity(self):
        params = init_params(8, 2, 4, 2, seed=2)
        masks = sample_masks(DropoutSpec(), params.d_e, np.random.default_rng(0))
        assert masks.entity is None and masks.relation_core is None
        np.testing.assert_array_equal(
            score_all_tails(params, 1, 0, masks), score_all_tails(params, 1, 0)
        )

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(8)
        rate = 0.3
        x = np.ones(200)
        samples = []
        for _ in range(3000):
            masks = sample_masks(DropoutSpec(input_rate=rate), 200, rng)
            samples.append(float(np.mean(x * masks.entity)))
        samples = np.array(samples)
        sem = samples.std(ddof=1) / np.sqrt(samples.size)
        assert abs(samples.mean() - 1.0) < 3 * sem

    def test_invalid_rate_rejected(self):
        with pytest.raises(ValueError):
            DropoutSpec(input_rate=1.0)


class TestSigmoidAndLoss:
    def test_sigmoid_zero_is_half(self):
        assert predict_sigmoid([0.0])[0] == 0.5

    def test_sigmoid_saturation_and_monotonicity(self):
        x = np.linspace(-30, 30, 1001)
        s = predict_sigmoid(x)
        assert np.all(np.diff(s) >= 0)
        assert s[0] < 1e-12 and s[-1] > 1 - 1e-12

    def test_sigmoid_symmetry(self):
        x = np.random.default_rng(0).normal(scale=5, size=1000)
        np.testing.assert_allclose(predict_sigmoid(x) + predict_sigmoid(-x), 1.0, atol=1e-12)

    def test_bce_closed_form(self):
        assert bce_loss([0.5, 0.5], [1.0, 0.0]) == pytest.approx(np.log(2.0))

    def test_bce_perfect_prediction_near_zero(self):
        assert bce_loss([1.0, 0.0], [1.0, 0.0]) < 1e-10

    def test_bce_matches_summation_oracle(self):
        rng = np.random.default_rng(5)
        p = rng.uniform(0.01, 0.99, size=50)
        y = (rng.random(50) < 0.3).astype(float)
        direct = -sum(
            yi * np.log(pi) + (1 - yi) * np.log(1 - pi) for pi, yi in zip(p, y)
        ) / 50
        assert bce_loss(p, y) == pytest.approx(direct, abs=1e-12)

    def test_clamp_counter(self):
        stats = ClampStats()
        bce_loss([0.0, 1.0, 0.5], [0.0, 1.0, 1.0], stats)
        assert stats.count == 2

    def test_label_smoothing(self):
        y = np.array([1.0, 0.0, 0.0, 0.0])
        smoothed = smooth_labels(y, 0.1)
        np.testing.assert_allclose(smoothed, 0.9 * y + 0.1 / 4)
        np.testing.assert_array_equal(smooth_labels(y, 0.0), y)


def finite_difference_grads(loss_fn, params, step=1e-5):
    """Central differences over every coordinate of every block."""
    grads = {}
    for name, arr in params.param_blocks().items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up = loss_fn()
            flat[i] = original - step
            down = loss_fn()
            flat[i] = original
            gflat[i] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def assert_grads_close(analytic, numeric, rel_tol=1e-4, floor=1e-6):
    """Max relative error per block, with a floor absorbing fd round-off.

    Central differences of an O(1) loss at step 1e-5 carry ~1e-11 absolute
    noise, so entries below `floor` cannot be measured relatively; the floor
    keeps the check meaningful (a wrong formula still fails by orders of
    magnitude) without flagging noise.
    """
    for name, g in analytic.items():
        ref = numeric[name]
        scale = np.maximum(np.maximum(np.abs(ref), np.abs(g)), floor)
        rel = np.max(np.abs(g - ref) / scale)
        assert rel < rel_tol, f"block {name}: max relative error {rel}"


def random_labels(rng, n_e, n_pos=3):
    y = np.zeros(n_e)
    y[rng.choice(n_e, size=n_pos, replace=False)] = 1.0
    return y


class TestTuckerGradients:
    def test_matches_finite_differences(self):
        for seed in range(3):
            rng = np.random.default_rng(seed)
            params = init_params(20, 6, 8, 4, seed=seed)
            h, r = int(rng.integers(20)), int(rng.integers(6))
            y = random_labels(rng, 20)
            _, grads = grad_tucker(params, h, r, y)
            numeric = finite_difference_grads(
                lambda: grad_tucker(params, h, r, y)[0], params
            )
            assert_grads_close(grads, numeric)

    def test_matches_finite_differences_with_fixed_masks(self):
        rng = np.random.default_rng(99)
        params = init_params(15, 4, 6, 3, seed=4)
        masks = sample_masks(DropoutSpec(0.5, 0.2, 0.2), params.d_e, rng)
        h, r = 3, 1
        y = random_labels(rng, 15)
        _, grads = grad_tucker(params, h, r, y, masks)
        numeric = finite_difference_grads(
            lambda: grad_tucker(params, h, r, y, masks)[0], params
        )
        assert_grads_close(grads, numeric)

    def test_zero_core_gradient_structure(self):
        params = init_params(10, 4, 5, 3, seed=6)
        params.G[:] = 0.0
        y = np.zeros(10)
        y[4] = 1.0
        _, grads = grad_tucker(params, 2, 1, y)
        # With a zero core the query vector is zero, so the tail gradient on E
        # vanishes and only the head row could receive signal (it is zero too,
        # because B = 0). The core gradient reduces to the outer-product term.
        np.testing.assert_array_equal(grads["E"], np.zeros_like(params.E))
        delta = (predict_sigmoid(np.zeros(10)) - y) / 10
        dv = delta @ params.E
        expected_G = np.einsum("p,q,j->pqj", params.E[2], params.R[1], dv)
        np.testing.assert_allclose(grads["G"], expected_G, atol=1e-12)

    def test_untouched_relation_rows_get_zero_grad(self):
        params = init_params(12, 5, 4, 3, seed=8)
        y = random_labels(np.random.default_rng(0), 12)
        _, grads = grad_tucker(params, 1, 2, y)
        for r in range(5):
            if r != 2:
                np.testing.assert_array_equal(grads["R"][r], np.zeros(3))


class TestRelationMatrix:
    def test_identity_slices(self):
        params = init_params(3, 2, 4, 2, seed=0)
        core = np.zeros((4, 2, 4))
        core[:, 0, :] = np.eye(4)
        params.G[:] = core
        params.R[:] = [[1.0, 0.0], [0.0, 1.0]]
        np.testing.assert_allclose(relation_matrix(params, 0), np.eye(4), atol=1e-15)

    def test_reproduces_score_as_bilinear_form(self):
        params = init_params(10, 4, 6, 3, seed=12)
        rng = np.random.default_rng(2)
        for _ in range(20):
            h, t = rng.integers(0, 10, size=2)
            r = int(rng.integers(0, 4))
            M = relation_matrix(params, r)
            bilinear = float(params.E[int(h)] @ M @ params.E[int(t)])
            assert bilinear == pytest.approx(score_tucker(params, int(h), r, int(t)), abs=1e-12)

    def test_asymmetry_bound(self):
        params = init_params(5, 3, 4, 2, seed=3)
        for r in range(3):
            M = relation_matrix(params, r)
            index = np.linalg.norm(M - M.T) / np.linalg.norm(M)
            assert 0.0 <= index <= 2.0


class TestBaselines:
    def test_transe_exact_translation(self):
        params = init_baseline("transe", 2, 1, 2, seed=0)
        params.E[:] = [[0.0, 0.0], [1.0, 1.0]]
        params.R[:] = [[1.0, 1.0]]
        assert score_baseline(params, 0, 0, 1) == pytest.approx(0.0)
        assert score_baseline(params, 0, 0, 0) < 0.0

    def test_distmult_hand_sum(self):
        params = init_baseline("distmult", 2, 1, 2, seed=0)
        params.E[:] = [[1.0, 2.0], [1.0, 1.0]]
        params.R[:] = [[1.0, 1.0]]
        assert score_baseline(params, 0, 0, 1) == pytest.approx(3.0)

    def test_complex_reduces_to_distmult_when_real(self):
        cx = init_baseline("complex", 3, 2, 4, seed=1)
        cx.E[:, 2:] = 0.0  # zero imaginary halves
        cx.R[:, 2:] = 0.0
        dm = init_baseline("distmult", 3, 2, 2, seed=1)
        dm.E[:] = cx.E[:, :2]
        dm.R[:] = cx.R[:, :2]
        for h in range(3):
            for t in range(3):
                assert score_baseline(cx, h, 0, t) == pytest.approx(
                    score_baseline(dm, h, 0, t), abs=1e-12
                )

    def test_distmult_symmetric_in_head_tail(self):
        params = init_baseline("distmult", 8, 3, 5, seed=2)
        rng = np.random.default_rng(1)
        for _ in range(30):
            h, t = rng.integers(0, 8, size=2)
            r = int(rng.integers(0, 3))
            assert score_baseline(params, int(h), r, int(t)) == score_baseline(
                params, int(t), r, int(h)
            )

    @pytest.mark.parametrize("variant", ["transe", "distmult", "complex"])
    def test_gradients_match_finite_differences(self, variant):
        rng = np.random.default_rng(3)
        params = init_baseline(variant, 12, 4, 6, seed=5)
        h, r = 2, 1
        y = random_labels(rng, 12)
        _, grads = loss_and_grads(params, h, r, y)
        numeric = finite_difference_grads(
            lambda: loss_and_grads(params, h, r, y)[0], params
        )
        assert_grads_close(grads, numeric)

    def test_score_all_tails_consistent(self):
        for variant in ("transe", "distmult", "complex"):
            params = init_baseline(variant, 9, 2, 4, seed=7)
            scores = score_all_tails(params, 3, 1)
            for t in range(9):
                assert scores[t] == pytest.approx(score_baseline(params, 3, 1, t), abs=1e-12)
