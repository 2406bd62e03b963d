import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgwk.numerics import ContractError, DimensionError, Tensor, sum as tsum
from fgwk.selector import (
    SelectionSchedule,
    gather_points,
    pixel_confidence,
    rank_and_select,
    score_pixels,
)


def brute_force_topk(p, k):
    """k largest by (value, -index) via exhaustive pairwise ranking."""
    n = len(p)
    rank = [sum(1 for j in range(n) if (p[j], -j) > (p[i], -i)) for i in range(n)]
    return [i for r in range(k) for i in range(n) if rank[i] == r]


class TestScorePixels:
    def test_identity_head_on_single_pixel(self):
        fmap = Tensor(np.array([1.0, -2.0, 3.0]).reshape(3, 1, 1))
        out = score_pixels(fmap, Tensor(np.eye(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data.ravel(), [1, -2, 3])

    def test_zero_head_scores_bias(self, rng):
        fmap = Tensor(rng.normal(size=(5, 3, 3)))
        out = score_pixels(fmap, Tensor(np.zeros((5, 4))), Tensor([1.0, 2.0, 3.0, 4.0]))
        assert out.shape == (4, 3, 3)
        for c in range(4):
            np.testing.assert_allclose(out.data[c], c + 1)

    def test_matches_per_pixel_loop(self, rng):
        fmap = rng.normal(size=(6, 4, 5))
        w, b = rng.normal(size=(6, 3)), rng.normal(size=3)
        out = score_pixels(Tensor(fmap), Tensor(w), Tensor(b)).data
        for i in range(4):
            for j in range(5):
                np.testing.assert_allclose(out[:, i, j], fmap[:, i, j] @ w + b, atol=1e-12)

    def test_batched_equals_single(self, rng):
        fmap = rng.normal(size=(2, 6, 3, 3))
        w, b = Tensor(rng.normal(size=(6, 4))), Tensor(rng.normal(size=4))
        batched = score_pixels(Tensor(fmap), w, b).data
        for n in range(2):
            np.testing.assert_allclose(batched[n], score_pixels(Tensor(fmap[n]), w, b).data)

    def test_width_mismatch(self, rng):
        with pytest.raises(DimensionError):
            score_pixels(Tensor(rng.normal(size=(5, 2, 2))), Tensor(np.zeros((4, 3))), None)


class TestConfidence:
    def test_uniform_logits(self):
        assert pixel_confidence(np.zeros((4, 1, 1)))[0, 0] == pytest.approx(0.25)

    def test_two_classes(self):
        conf = pixel_confidence(np.array([2.0, 0.0]).reshape(2, 1, 1))
        assert conf[0, 0] == pytest.approx(0.8808, abs=1e-3)

    def test_uniform_map(self):
        scores = np.broadcast_to(np.array([0.3, 1.0, -2.0, 0.0])[:, None, None], (4, 5, 5))
        conf = pixel_confidence(scores)
        assert np.all(conf == conf[0, 0])


class TestRankAndSelect:
    def test_example(self):
        res = rank_and_select(np.array([0.1, 0.7, 0.05, 0.15]), 2)
        assert res.sorted_indices.tolist() == [1, 3, 0, 2]
        assert res.chosen.tolist() == [1, 3]

    def test_ties_by_ascending_index(self):
        assert rank_and_select(np.full(6, 0.5), 3).chosen.tolist() == [0, 1, 2]

    @pytest.mark.parametrize("k", [0, 17])
    def test_k_out_of_range(self, k):
        with pytest.raises(ContractError):
            rank_and_select(np.zeros((4, 4)), k)

    def test_invariants(self, rng):
        p = rng.random((8, 8))
        res = rank_and_select(p, 10)
        flat = p.ravel()
        assert sorted(res.sorted_indices.tolist()) == list(range(64))
        assert np.all(np.diff(flat[res.sorted_indices]) <= 0)
        assert res.chosen.tolist() == res.sorted_indices[:10].tolist()

    def test_random_maps_match_oracle(self, rng):
        for _ in range(20):
            # coarse values force many ties
            p = np.round(rng.random((8, 8)), 1).ravel()
            k = int(rng.integers(1, 65))
            assert rank_and_select(p, k).chosen.tolist() == brute_force_topk(p.tolist(), k)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 5), min_size=2, max_size=30), st.data())
    def test_monotonicity(self, values, data):
        p = np.array(values, dtype=float)
        k = data.draw(st.integers(1, len(p) - 1))
        chosen = rank_and_select(p, k).chosen
        outside = [i for i in range(len(p)) if i not in set(chosen.tolist())]
        i = data.draw(st.sampled_from(outside))
        p[i] = p.max() + 1
        assert i in rank_and_select(p, k).chosen

    def test_permutation_equivariance(self, rng):
        fmap = rng.normal(size=(3, 4, 4))
        conf = rng.random(16)
        perm = rng.permutation(16)
        flat = fmap.reshape(3, 16)
        k = 5
        a = gather_points(Tensor(fmap), rank_and_select(conf, k).chosen).data
        permuted_map = flat[:, perm].reshape(3, 4, 4)
        b = gather_points(Tensor(permuted_map), rank_and_select(conf[perm], k).chosen).data
        assert sorted(map(tuple, a.round(12))) == sorted(map(tuple, b.round(12)))


class TestGather:
    def test_first_pixel(self, rng):
        fmap = rng.normal(size=(3, 2, 2))
        np.testing.assert_allclose(gather_points(Tensor(fmap), [0]).data[0], fmap[:, 0, 0])

    def test_all_pixels_is_reshape(self, rng):
        fmap = rng.normal(size=(3, 2, 4))
        out = gather_points(Tensor(fmap), np.arange(8)).data
        np.testing.assert_allclose(out, fmap.reshape(3, 8).T)

    def test_grad_marks_selected_positions(self, rng):
        fmap = Tensor(rng.normal(size=(2, 3, 3)), requires_grad=True)
        tsum(gather_points(fmap, [4, 0])).backward()
        expected = np.zeros((2, 3, 3))
        expected[:, 1, 1] = 1
        expected[:, 0, 0] = 1
        np.testing.assert_array_equal(fmap.grad, expected)

    def test_invalid_index(self, rng):
        with pytest.raises(IndexError):
            gather_points(Tensor(rng.normal(size=(2, 2, 2))), [4])


class TestSchedule:
    def test_default_schedule(self):
        sched = SelectionSchedule()
        assert sched.ks == (32, 16, 8, 4)
        assert sched.total == 60

    def test_rejects_k_larger_than_map(self):
        from fgwk.exceptions import ConfigurationError

        with pytest.raises(ConfigurationError, match="selections"):
            SelectionSchedule((32, 16, 8, 17)).validate([(16, 32, 32), (32, 16, 16), (64, 8, 8), (128, 4, 4)])
