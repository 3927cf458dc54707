import numpy as np
import pytest

from chiralis.errors import ParameterError, ValidationError
from chiralis.mesh import ChiralityAnnotation
from chiralis.metrics import (MatchResult, augment_features,
                              chirality_accuracy, default_tolerance_grid,
                              load_correspondence, match_nearest,
                              matching_accuracy, matching_error,
                              max_pairwise_distance, pck_curve)
from chiralis.network import ChiralityField


def field_from(chi, included=None):
    chi = np.asarray(chi, dtype=np.float64)
    if included is None:
        included = np.ones(len(chi), dtype=bool)
    return ChiralityField(chi=chi, chi_bar=-chi, included=included)


class TestChiralityAccuracy:
    def test_all_correct(self):
        field = field_from([0.5, -0.5, 0.9, -0.1])
        ann = ChiralityAnnotation(np.array([1, -1, 1, -1]))
        assert chirality_accuracy([field], [ann]) == 1.0

    def test_all_inverted(self):
        field = field_from([-0.5, 0.5, -0.9, 0.1])
        ann = ChiralityAnnotation(np.array([1, -1, 1, -1]))
        assert chirality_accuracy([field], [ann]) == 1.0

    def test_three_of_four(self):
        field = field_from([0.5, -0.5, 0.9, 0.1])
        ann = ChiralityAnnotation(np.array([1, -1, 1, -1]))
        assert chirality_accuracy([field], [ann]) == 0.75

    def test_global_sign_flip_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            chi = rng.uniform(-1, 1, n)
            labels = rng.choice([-1, 1], n)
            ann = ChiralityAnnotation(labels)
            a = chirality_accuracy([field_from(chi)], [ann])
            b = chirality_accuracy([field_from(-chi)], [ann])
            assert a == pytest.approx(b, abs=1e-12)
            assert a >= 0.5

    def test_excluded_vertices_skipped(self):
        field = field_from([0.5, -0.7, 0.9], included=np.array([True, False,
                                                                True]))
        ann = ChiralityAnnotation(np.array([1, 1, 1]))  # middle one is wrong
        assert chirality_accuracy([field], [ann]) == 1.0

    def test_per_shape_then_aggregate_order(self):
        # mean of per-shape fractions first, complement applied once globally
        f1 = field_from([0.5, 0.5])        # shape 1: acc 1.0
        a1 = ChiralityAnnotation(np.array([1, 1]))
        f2 = field_from([0.5, 0.5, 0.5, -0.5])  # shape 2: acc 0.25
        a2 = ChiralityAnnotation(np.array([-1, -1, -1, -1]))
        # aggregate acc = (1.0 + 0.25) / 2 = 0.625 -> max(0.625, 0.375)
        assert chirality_accuracy([f1, f2], [a1, a2]) == pytest.approx(0.625)

    def test_empty_shape_set(self):
        with pytest.raises(ValidationError):
            chirality_accuracy([], [])


class TestAugment:
    def test_dimensions(self):
        base = np.random.default_rng(1).normal(size=(6, 4))
        out = augment_features(base, np.linspace(-1, 1, 6), 0.5)
        assert out.shape == (6, 5)

    def test_weight_zero_is_inert_for_matching(self):
        rng = np.random.default_rng(2)
        src = rng.normal(size=(10, 4))
        tgt = rng.normal(size=(12, 4))
        chi_s = rng.uniform(-1, 1, 10)
        chi_t = rng.uniform(-1, 1, 12)
        plain = match_nearest(src, tgt)
        augmented = match_nearest(augment_features(src, chi_s, 0.0),
                                  augment_features(tgt, chi_t, 0.0))
        np.testing.assert_array_equal(plain.correspondence,
                                      augmented.correspondence)

    def test_opposite_sides_distinguishable(self):
        base = np.tile([1.0, 2.0, 3.0], (2, 1))
        out = augment_features(base, np.array([1.0, -1.0]), 0.5)
        cos = (out[0] @ out[1]) / (np.linalg.norm(out[0]) *
                                   np.linalg.norm(out[1]))
        assert cos < 1.0 - 1e-6


def brute_force_match(src, tgt):
    def unit(x):
        return x / max(np.linalg.norm(x), 1e-12)
    corr = []
    for row in src:
        sims = [unit(row) @ unit(t) for t in tgt]
        best = max(range(len(tgt)), key=lambda j: (sims[j], -j))
        corr.append(best)
    return np.array(corr)


class TestMatchNearest:
    def test_identity_on_self(self):
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(15, 6))
        result = match_nearest(feats, feats)
        np.testing.assert_array_equal(result.correspondence, np.arange(15))
        np.testing.assert_allclose(result.similarity, 1.0, atol=1e-12)

    def test_row_scaling_invariance(self):
        rng = np.random.default_rng(4)
        src = rng.normal(size=(8, 5))
        tgt = rng.normal(size=(9, 5))
        scales_s = rng.uniform(0.1, 10, (8, 1))
        scales_t = rng.uniform(0.1, 10, (9, 1))
        a = match_nearest(src, tgt)
        b = match_nearest(src * scales_s, tgt * scales_t)
        np.testing.assert_array_equal(a.correspondence, b.correspondence)

    def test_against_brute_force(self):
        rng = np.random.default_rng(5)
        src = rng.normal(size=(5, 3))
        tgt = rng.normal(size=(7, 3))
        got = match_nearest(src, tgt)
        np.testing.assert_array_equal(got.correspondence,
                                      brute_force_match(src, tgt))

    def test_ties_take_lower_index(self):
        src = np.array([[1.0, 0.0]])
        tgt = np.array([[2.0, 0.0], [1.0, 0.0], [3.0, 0.0]])  # all cosine 1
        assert match_nearest(src, tgt).correspondence[0] == 0

    def test_empty_target(self):
        with pytest.raises(ValidationError):
            match_nearest(np.ones((2, 3)), np.zeros((0, 3)))


class TestMatchingErrorAccuracy:
    def test_perfect_prediction(self):
        coords = np.random.default_rng(6).normal(size=(10, 3))
        gt = np.arange(10)
        match = MatchResult(correspondence=gt.copy(),
                            similarity=np.ones(10))
        assert matching_error(match, gt, coords) == 0.0
        assert matching_accuracy(match, gt, coords, 0.5) == 1.0

    def test_single_vertex_distance(self):
        coords = np.array([[0.0, 0, 0], [2.0, 0, 0]])
        match = MatchResult(correspondence=np.array([1]),
                            similarity=np.ones(1))
        assert matching_error(match, np.array([0]), coords) == 2.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(7)
        coords = rng.normal(size=(8, 3))
        pred = rng.integers(0, 8, 5)
        gt = rng.integers(0, 8, 5)
        match = MatchResult(correspondence=pred, similarity=np.ones(5))
        base = matching_error(match, gt, coords)
        shifted = matching_error(match, gt, coords + np.array([5.0, -3.0, 1.0]))
        assert shifted == pytest.approx(base, abs=1e-12)

    def test_epsilon_zero_strict(self):
        coords = np.random.default_rng(8).normal(size=(4, 3))
        gt = np.arange(4)
        match = MatchResult(correspondence=gt.copy(), similarity=np.ones(4))
        assert matching_accuracy(match, gt, coords, 0.0) == 0.0

    def test_hand_built_two_thirds(self):
        d = 4.0
        coords = np.zeros((4, 3))
        coords[1, 0] = 0.3 * d
        coords[2, 0] = 0.9 * d
        coords[3, 0] = d  # sets the diameter to exactly d
        match = MatchResult(correspondence=np.array([0, 1, 2]),
                            similarity=np.ones(3))
        gt = np.array([0, 0, 0])
        assert max_pairwise_distance(coords) == pytest.approx(d)
        assert matching_accuracy(match, gt, coords, 0.5) == pytest.approx(2 / 3)

    def test_bad_indices(self):
        coords = np.zeros((3, 3))
        match = MatchResult(correspondence=np.array([5]),
                            similarity=np.ones(1))
        with pytest.raises(ValidationError):
            matching_error(match, np.array([0]), coords)
        with pytest.raises(ParameterError):
            matching_accuracy(MatchResult(np.array([0]), np.ones(1)),
                              np.array([0]), coords, 1.5)


def trapezoid_oracle(tol, acc):
    total = 0.0
    for i in range(len(tol) - 1):
        total += (acc[i] + acc[i + 1]) / 2.0 * (tol[i + 1] - tol[i])
    return total / (tol[-1] - tol[0])


class TestPck:
    def test_perfect_matching_flat_curve(self):
        coords = np.random.default_rng(9).normal(size=(6, 3))
        gt = np.arange(6)
        match = MatchResult(correspondence=gt.copy(), similarity=np.ones(6))
        grid = np.linspace(0.01, 0.2, 20)  # grid excludes 0
        curve = pck_curve(match, gt, coords, grid)
        np.testing.assert_array_equal(curve.accuracies, np.ones(20))
        assert curve.auc == pytest.approx(1.0)

    def test_monotone_accuracies(self):
        rng = np.random.default_rng(10)
        coords = rng.normal(size=(30, 3))
        match = MatchResult(correspondence=rng.integers(0, 30, 25),
                            similarity=np.ones(25))
        gt = rng.integers(0, 30, 25)
        curve = pck_curve(match, gt, coords, default_tolerance_grid())
        assert (np.diff(curve.accuracies) >= 0).all()
        assert 0.0 <= curve.auc <= 1.0

    def test_auc_against_trapezoid_oracle(self):
        d = 2.0
        coords = np.zeros((4, 3))
        coords[1, 0] = 0.1 * d
        coords[2, 0] = 0.45 * d
        coords[3, 0] = d
        match = MatchResult(correspondence=np.array([0, 1, 2]),
                            similarity=np.ones(3))
        gt = np.zeros(3, dtype=int)
        grid = np.array([0.05, 0.2, 0.5, 1.0])
        curve = pck_curve(match, gt, coords, grid)
        np.testing.assert_allclose(curve.accuracies,
                                   [1 / 3, 2 / 3, 1.0, 1.0])
        assert curve.auc == pytest.approx(
            trapezoid_oracle(grid, curve.accuracies), abs=1e-12)

    def test_grid_validation(self):
        match = MatchResult(correspondence=np.array([0]),
                            similarity=np.ones(1))
        coords = np.zeros((1, 3))
        with pytest.raises(ParameterError):
            pck_curve(match, np.array([0]), coords, [])
        with pytest.raises(ParameterError):
            pck_curve(match, np.array([0]), coords, [0.2, 0.1])


class TestCorrespondenceFile:
    def test_load(self, tmp_path):
        path = tmp_path / "gt.txt"
        path.write_text("0\n2\n1\n", encoding="utf-8")
        np.testing.assert_array_equal(load_correspondence(path, 3, 3),
                                      [0, 2, 1])

    def test_length_error(self, tmp_path):
        path = tmp_path / "gt.txt"
        path.write_text("0\n1\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_correspondence(path, 3, 3)

    def test_range_error(self, tmp_path):
        path = tmp_path / "gt.txt"
        path.write_text("0\n9\n1\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_correspondence(path, 3, 3)
