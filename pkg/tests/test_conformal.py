import logging
import math
import unittest

import numpy as np
from scipy.stats import kstest

from cpclustering.commons import NcmSpec, TauMode, ParameterError
from cpclustering.conformal import knn_ncm, kde_ncm, p_value, conforms, leave_one_out_p_values, \
    silverman_bandwidth, tau_matrix, neighborhood_p_values
from cpclustering.data_manager import dataset_from_arrays, pairwise_distances
from cpclustering.graph_tools import build_epsilon_graph, build_knn_graph

logger = logging.getLogger("Conformal tests")


class TestConformal(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(filename=None, level="ERROR", format='%(asctime)s - %(name)s - %(levelname)s: %(message)s')
        self.tau_one = TauMode.deterministic(1.0)

    def test_knn_ncm(self):
        self.assertEqual(knn_ncm([0.0], [[1.0], [2.0], [3.0]], 2), 3.0)
        self.assertEqual(knn_ncm([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], 2), 0.0)
        self.assertEqual(knn_ncm([0.0], [[1.0], [2.0], [3.0]], 5), 6.0)

    def test_knn_ncm_errors(self):
        with self.assertRaises(ParameterError):
            knn_ncm([0.0], [], 1)
        with self.assertRaises(ParameterError):
            knn_ncm([0.0], [[1.0]], 0)

    def test_knn_ncm_geometry(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=2)
        S = rng.normal(size=(10, 2))
        base = knn_ncm(z, S, 3)
        shift = np.array([5.0, -2.0])
        angle = 0.7
        rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        self.assertAlmostEqual(knn_ncm(z + shift, S + shift, 3), base, places=10)
        self.assertAlmostEqual(knn_ncm(rotation @ z, S @ rotation.T, 3), base, places=10)
        self.assertAlmostEqual(knn_ncm(2.5 * z, 2.5 * S, 3), 2.5 * base, places=10)

    def test_kde_ncm(self):
        self.assertAlmostEqual(kde_ncm([0.0], [[0.0]], 1.0), -1.0 / (2 * math.pi), places=12)
        far = kde_ncm([0.0], [[10.0]], 1.0)
        self.assertTrue(math.isclose(far, -math.exp(-50) / (2 * math.pi), rel_tol=1e-9))
        self.assertTrue(far < 0)
        S = [[0.3], [1.2], [-0.4]]
        self.assertAlmostEqual(kde_ncm([0.1], S, 0.5), kde_ncm([0.1], S + S, 0.5), places=12)

    def test_kde_ncm_errors(self):
        with self.assertRaises(ParameterError):
            kde_ncm([0.0], [[1.0]], 0.0)
        with self.assertRaises(ParameterError):
            NcmSpec.kde(-1.0)

    def test_p_value_all_equal(self):
        # z and the two points of S0 form an equilateral triangle
        S0 = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        z = [1.0, 0.0, 0.0]
        ncm = NcmSpec.knn(2)
        self.assertAlmostEqual(p_value(z, S0, ncm, self.tau_one), 1.0)
        self.assertAlmostEqual(p_value(z, S0, ncm, TauMode.deterministic(0.5)), 0.5)

    def test_p_value_outlier(self):
        p = p_value([10.0], [[0.0], [0.1], [0.2]], NcmSpec.knn(1), self.tau_one)
        self.assertEqual(p, 0.25)

    def test_p_value_most_conforming(self):
        self.assertEqual(p_value([0.0], [[-1.0], [1.0]], NcmSpec.knn(2), self.tau_one), 1.0)

    def test_p_value_single_reference_point(self):
        self.assertEqual(p_value([0.0], [[3.0]], NcmSpec.knn(4), TauMode.deterministic(0.4)), 0.4)

    def test_p_value_empty_reference(self):
        with self.assertRaises(ParameterError):
            p_value([0.0], [], NcmSpec.knn(1), self.tau_one)

    def test_p_value_range_smoothed(self):
        rng = np.random.default_rng(12)
        for seed in range(20):
            S0 = rng.normal(size=(8, 2))
            p = p_value(rng.normal(size=2) * 3, S0, NcmSpec.knn(3), TauMode.smoothed(seed))
            self.assertTrue(0 < p <= 1)

    def test_p_value_permutation_invariance(self):
        rng = np.random.default_rng(21)
        S0 = rng.normal(size=(12, 3))
        z = rng.normal(size=3)
        for ncm in (NcmSpec.knn(3), NcmSpec.kde(0.8)):
            reference = p_value(z, S0, ncm, TauMode.deterministic(0.3))
            for _ in range(5):
                self.assertEqual(p_value(z, rng.permutation(S0), ncm, TauMode.deterministic(0.3)), reference)

    def test_smoothed_p_value_reproducible(self):
        S0 = [[0.0], [1.0], [1.0], [2.0]]
        self.assertEqual(p_value([1.0], S0, NcmSpec.knn(1), TauMode.smoothed(5)),
                         p_value([1.0], S0, NcmSpec.knn(1), TauMode.smoothed(5)))

    def test_conforms(self):
        S0 = [[0.0], [0.1], [0.2]]
        self.assertFalse(conforms([10.0], S0, NcmSpec.knn(1), self.tau_one, significance=0.3))
        self.assertTrue(conforms([0.1], S0, NcmSpec.knn(1), self.tau_one, significance=0.3))
        with self.assertRaises(ParameterError):
            conforms([0.1], S0, NcmSpec.knn(1), self.tau_one, significance=1.5)

    def test_leave_one_out_validity(self):
        passes = 0
        for seed in range(5):
            points = np.random.default_rng(seed).standard_normal((200, 2))
            p_values = leave_one_out_p_values(points, NcmSpec.knn(5), TauMode.smoothed(seed))
            self.assertTrue(np.all(p_values > 0) and np.all(p_values <= 1))
            if kstest(p_values, "uniform").pvalue > 0.01:
                passes += 1
        self.assertTrue(passes >= 4)

    def test_silverman_bandwidth(self):
        rng = np.random.default_rng(1)
        self.assertTrue(silverman_bandwidth(rng.normal(size=(100, 2))) > 0)
        self.assertEqual(silverman_bandwidth([[1.0, 1.0], [1.0, 1.0]]), 1.0)

    def test_tau_matrix(self):
        self.assertTrue(np.all(tau_matrix(TauMode.deterministic(0.7), 4) == 0.7))
        first = tau_matrix(TauMode.smoothed(3), 5)
        self.assertTrue(np.array_equal(first, tau_matrix(TauMode.smoothed(3), 5)))
        self.assertTrue(np.all(first > 0) and np.all(first <= 1))
        self.assertFalse(np.array_equal(first, tau_matrix(TauMode.smoothed(4), 5)))

    def check_against_direct(self, points, graph, ncm, tau):
        data = dataset_from_arrays(points)
        dm = pairwise_distances(data)
        batch = neighborhood_p_values(dm, graph, ncm, tau, data.d)
        for i in range(data.n):
            for j in range(data.n):
                reference = [member for member in graph.adjacency[j] if member != i]
                if i == j or not reference:
                    self.assertEqual(batch[i, j], 0.0)
                else:
                    self.assertEqual(batch[i, j], p_value(data.points[i], data.points[reference], ncm, tau))

    def test_neighborhood_p_values_match_direct_computation(self):
        rng = np.random.default_rng(8)
        points = rng.uniform(size=(14, 2))
        dm = pairwise_distances(dataset_from_arrays(points))
        tau = TauMode.deterministic(0.6)
        for graph in (build_epsilon_graph(dm, 0.35), build_knn_graph(dm, 3)):
            for ncm in (NcmSpec.knn(1), NcmSpec.knn(3), NcmSpec.knn(20), NcmSpec.kde(0.3)):
                self.check_against_direct(points, graph, ncm, tau)

    def test_neighborhood_p_values_on_gridded_coordinates(self):
        rng = np.random.default_rng(3)
        lattice = np.array([[0.1 * row, 0.1 * col] for row in range(4) for col in range(4)])
        fixtures = [np.vstack([lattice, lattice[[0, 5, 10]]]),
                    rng.integers(0, 4, size=(24, 2)).astype(float),
                    0.1 * rng.integers(0, 6, size=(24, 3))]
        tau = TauMode.deterministic(0.5)
        for points in fixtures:
            dm = pairwise_distances(dataset_from_arrays(points))
            for graph in (build_epsilon_graph(dm, 0.25), build_epsilon_graph(dm, 1.5), build_knn_graph(dm, 4)):
                for ncm in (NcmSpec.knn(1), NcmSpec.knn(3), NcmSpec.kde(0.1), NcmSpec.kde(0.5)):
                    self.check_against_direct(points, graph, ncm, tau)

    def test_neighborhood_p_values_identical_points(self):
        points = np.ones((5, 2))
        dm = pairwise_distances(dataset_from_arrays(points))
        values = neighborhood_p_values(dm, build_epsilon_graph(dm, 0.1), NcmSpec.knn(2), self.tau_one, 2)
        self.assertTrue(np.all(values[~np.eye(5, dtype=bool)] == 1.0))
        self.assertTrue(np.all(np.diag(values) == 0))
