import numpy as np
import pytest

from michs.classifier import (
    BaselineConfig,
    ClassifierSettings,
    assign_class,
    class_residuals,
    classify,
    evaluate,
    ista_l1,
    majority_vote,
    src_l1_classify,
)
from michs.model import ObservationMatrix, PriorParams, build_dictionary
from michs.sampler import ChainConfig
from shared.exceptions import ConfigError, DatasetError, DimensionError
from shared.utils import derive_seed
from tests.oracles import orthogonal_dictionary

MICHS_PARAMS = PriorParams(sigma2=1.0, sigma_n2=0.01, lam=1.0)
SHORT_CHAIN = ChainConfig(max_iter=200, burn_in=50)


def class_one_sample(dictionary, rng, views, snr_db=20.0):
    """T views of a class-1 subject: random combinations of class-1 atoms plus noise"""
    part = dictionary.atoms[:, dictionary.class_slice(1)]
    columns = []
    for _ in range(views):
        clean = part @ rng.standard_normal(part.shape[1])
        noise_std = np.linalg.norm(clean) / np.sqrt(dictionary.m) / 10.0 ** (snr_db / 20.0)
        columns.append(clean + noise_std * rng.standard_normal(dictionary.m))
    return ObservationMatrix.from_vectors(columns)


class TestAssignment:

    def test_lowest_cost_wins(self):
        assert assign_class([3.0, 1.0, 2.0]) == 2

    def test_ties_go_to_lowest_class(self):
        assert assign_class([1.0, 1.0, 1.0]) == 1

    def test_single_class(self):
        assert assign_class([42.0]) == 1

    def test_non_finite_cost_rejected(self):
        with pytest.raises(ConfigError):
            assign_class([1.0, np.nan])

    def test_constant_shift_keeps_prediction(self, rng):
        for _ in range(500):
            costs = rng.integers(0, 6, size=int(rng.integers(1, 8))).astype(float)
            shift = float(rng.integers(-1000, 1000))
            assert assign_class(costs + shift) == assign_class(costs)

    def test_majority_vote(self):
        winner, votes = majority_vote([2, 2, 1], 3)
        assert winner == 2
        np.testing.assert_array_equal(votes, [1, 2, 0])

    def test_vote_ties_go_to_lowest_class(self):
        assert majority_vote([3, 2], 3)[0] == 2


class TestClassify:

    def test_orthogonal_classes(self, rng):
        dictionary = orthogonal_dictionary(rng, m=12, per_class=4)
        correct = 0
        for trial in range(20):
            Y = class_one_sample(dictionary, rng, views=2)
            result = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01,
                              ChainConfig(max_iter=200, burn_in=50, seed=trial))
            correct += int(result.predicted_class == 1)
            assert result.per_class_cost.shape == (2,)
        assert correct >= 19

    @pytest.mark.slow
    def test_orthogonal_classes_two_hundred_trials(self):
        rng = np.random.default_rng(77)
        dictionary = orthogonal_dictionary(rng, m=12, per_class=4)
        correct = 0
        for trial in range(200):
            Y = class_one_sample(dictionary, rng, views=2)
            result = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01,
                              ChainConfig(max_iter=200, burn_in=50, seed=trial))
            correct += int(result.predicted_class == 1)
        assert correct >= 196

    def test_zero_observation_ties_to_class_one(self, rng):
        dictionary = orthogonal_dictionary(rng, m=8, per_class=3)
        Y = ObservationMatrix.from_array(np.zeros((dictionary.m, 2)))
        result = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, SHORT_CHAIN, keep_solutions=True)
        np.testing.assert_array_equal(result.per_class_cost, [0.0, 0.0])
        assert result.predicted_class == 1
        assert all(np.all(s.supports.flags == 0) for s in result.per_class_solutions)

    def test_identical_hypotheses_tie_to_class_one(self, rng):
        dictionary = orthogonal_dictionary(rng, m=12, per_class=4, num_classes=3)
        part = dictionary.atoms[:, dictionary.class_slice(3)]
        Y = ObservationMatrix.from_vectors([part @ rng.standard_normal(4) for _ in range(2)])
        # kappa_in == kappa_out: every hypothesis sees the same inclusion matrix
        result = classify(dictionary, Y, MICHS_PARAMS, 0.2, 0.2, SHORT_CHAIN, class_seeds=[11, 11, 11])
        assert result.per_class_cost[0] == result.per_class_cost[1] == result.per_class_cost[2]
        assert result.predicted_class == 1

    def test_default_class_seeds(self, rng):
        dictionary = orthogonal_dictionary(rng, m=12, per_class=4)
        Y = class_one_sample(dictionary, rng, views=2)
        cfg = ChainConfig(max_iter=60, burn_in=10, seed=8)
        default = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, cfg)
        explicit = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, cfg,
                            class_seeds=[derive_seed(8, 1), derive_seed(8, 2)])
        np.testing.assert_array_equal(default.per_class_cost, explicit.per_class_cost)
        with pytest.raises(DimensionError):
            classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, cfg, class_seeds=[1])

    def test_residual_assignment(self, rng):
        dictionary = orthogonal_dictionary(rng, m=12, per_class=4)
        Y = class_one_sample(dictionary, rng, views=2)
        result = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, SHORT_CHAIN,
                          assign_by="residual", keep_solutions=True)
        np.testing.assert_allclose(result.per_class_cost, [s.residual for s in result.per_class_solutions])

    def test_seeded_runs_identical(self, rng):
        dictionary = orthogonal_dictionary(rng, m=12, per_class=4)
        Y = class_one_sample(dictionary, rng, views=3)
        first = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, SHORT_CHAIN)
        second = classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, SHORT_CHAIN)
        np.testing.assert_array_equal(first.per_class_cost, second.per_class_cost)

    def test_unknown_assignment_rejected(self, rng):
        dictionary = orthogonal_dictionary(rng, m=8, per_class=3)
        Y = ObservationMatrix.from_array(np.ones((dictionary.m, 1)))
        with pytest.raises(ConfigError):
            classify(dictionary, Y, MICHS_PARAMS, 0.4, 0.01, SHORT_CHAIN, assign_by="votes")


class TestIstaL1:

    def test_scalar_soft_threshold(self):
        atom = np.array([[0.6], [0.8]])
        solution = ista_l1(atom, atom[:, 0], l1_penalty=0.3, max_iterations=500, step_tolerance=1e-12)
        assert solution.converged
        assert solution.code[0] == pytest.approx(0.7, abs=1e-10)

    def test_objective_non_increasing(self, rng):
        atoms = rng.standard_normal((6, 10))
        atoms /= np.linalg.norm(atoms, axis=0)
        y = rng.standard_normal(6)
        solution = ista_l1(atoms, y, 0.1, 300, 1e-9, record_history=True)
        history = np.array(solution.objective_history)
        assert np.all(np.diff(history) <= 1e-12 * np.abs(history[:-1]) + 1e-15)

    def test_non_convergence_returns_best_iterate(self, rng):
        atoms = rng.standard_normal((6, 10))
        atoms /= np.linalg.norm(atoms, axis=0)
        solution = ista_l1(atoms, rng.standard_normal(6), 0.01, 2, 1e-15, record_history=True)
        assert not solution.converged
        assert solution.iterations == 2
        assert solution.objective_history[-1] == min(solution.objective_history)


class TestSrcL1:

    def test_zero_penalty_square_dictionary(self, rng):
        dictionary = orthogonal_dictionary(rng, m=6, per_class=3)
        y = dictionary.atoms[:, :3] @ np.array([0.5, -0.2, 0.8])
        solution = ista_l1(dictionary.atoms, y, 0.0, 1000, 1e-12)
        expected = np.linalg.solve(dictionary.atoms, y)
        np.testing.assert_allclose(solution.code, expected, atol=1e-9)
        residuals = class_residuals(dictionary, y, solution.code)
        assert residuals[0] < 1e-9
        result = src_l1_classify(dictionary, ObservationMatrix.from_vectors([y]),
                                 BaselineConfig(l1_penalty=0.0, max_iterations=1000, step_tolerance=1e-12))
        assert result.predicted_class == 1

    def test_vote_across_views(self, rng):
        dictionary = orthogonal_dictionary(rng, m=6, per_class=2, num_classes=3)
        views = [dictionary.atoms[:, 2], dictionary.atoms[:, 3], dictionary.atoms[:, 0]]
        result = src_l1_classify(dictionary, ObservationMatrix.from_vectors(views), BaselineConfig())
        assert result.predicted_class == 2
        np.testing.assert_array_equal(result.votes, [1, 2, 0])
        assert result.per_class_cost.shape == (3,)


class TestEvaluate:

    @pytest.fixture
    def dictionary(self, rng):
        return orthogonal_dictionary(rng, m=6, per_class=3)

    def _test_set(self, dictionary, labels):
        return [(ObservationMatrix.from_vectors([dictionary.atoms[:, 3 * (c - 1)]]), c) for c in labels]

    def test_all_correct(self, dictionary):
        settings = ClassifierSettings(method="src_l1")
        report = evaluate(dictionary, self._test_set(dictionary, [1, 2, 2, 1]), settings, seed=0)
        assert report.accuracy == 1.0
        np.testing.assert_array_equal(report.confusion, [[2, 0], [0, 2]])
        np.testing.assert_array_equal(report.per_class_accuracy, [1.0, 1.0])

    def test_single_wrong_prediction(self, dictionary):
        settings = ClassifierSettings(method="src_l1")
        test_set = [(ObservationMatrix.from_vectors([dictionary.atoms[:, 0]]), 2)]
        report = evaluate(dictionary, test_set, settings, seed=0)
        assert report.accuracy == 0.0
        np.testing.assert_array_equal(report.confusion, [[0, 0], [1, 0]])

    def test_confusion_rows_count_true_classes(self, dictionary):
        labels = [1, 1, 1, 2, 2]
        report = evaluate(dictionary, self._test_set(dictionary, labels), ClassifierSettings(method="src_l1"), seed=0)
        np.testing.assert_array_equal(report.confusion.sum(axis=1), [3, 2])
        assert report.num_samples == 5

    def test_workers_do_not_change_results(self, dictionary):
        settings = ClassifierSettings(method="michs", params=MICHS_PARAMS, chain=SHORT_CHAIN)
        test_set = self._test_set(dictionary, [1, 2, 1])
        serial = evaluate(dictionary, test_set, settings, seed=5, workers=1)
        pooled = evaluate(dictionary, test_set, settings, seed=5, workers=2)
        for a, b in zip(serial.results, pooled.results):
            np.testing.assert_array_equal(a.per_class_cost, b.per_class_cost)

    def test_empty_test_set_rejected(self, dictionary):
        with pytest.raises(DatasetError):
            evaluate(dictionary, [], ClassifierSettings(), seed=0)


class TestSettings:

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError):
            ClassifierSettings(method="svm")

    def test_kappa_order_enforced(self):
        with pytest.raises(ConfigError):
            ClassifierSettings(kappa_in=0.1, kappa_out=0.2)

    def test_baseline_penalty_non_negative(self):
        with pytest.raises(ConfigError):
            BaselineConfig(l1_penalty=-1.0)

    def test_identical_class_dictionaries_tie(self):
        # class 2 repeats class 1's atoms; equal residuals pick class 1
        atoms = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        dictionary = build_dictionary([(a, 1) for a in atoms] + [(a, 2) for a in atoms])
        residuals = class_residuals(dictionary, np.array([0.0, 0.0, 1.0]), np.zeros(4))
        assert residuals[0] == residuals[1]
        assert assign_class(residuals) == 1
