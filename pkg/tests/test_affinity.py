import logging
import math
import os
import tempfile
import unittest

import numpy as np
from scipy.sparse.csgraph import connected_components

from cpclustering.affinity import gaussian_affinity, local_scale_affinity, self_tuning_affinity, cnn_affinity, \
    propagate_neighbors, np_affinity, snn_affinity, csnn_affinity, pg_affinity, cpsc_asymmetric, cpsca_symmetric, \
    hybrid_affinity, default_hybrid_sigma, write_affinity_csv, get_affinity_builder, METHOD_TO_AFFINITY_CLASS
from cpclustering.commons import AffinityParams, ConfigError, GraphKind, Method, NcmKind, NcmSpec, \
    NeighborhoodGraph, ParameterError, TauMode
from cpclustering.data_manager import dataset_from_arrays, pairwise_distances
from cpclustering.graph_tools import adjacency_matrix, build_epsilon_graph, build_knn_graph

logger = logging.getLogger("Affinity tests")


def knn_graph(adjacency, k_nn):
    return NeighborhoodGraph(kind=GraphKind.KNN, adjacency=adjacency, k_nn=k_nn, directed=True)


class TestAffinity(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(filename=None, level="ERROR", format='%(asctime)s - %(name)s - %(levelname)s: %(message)s')
        self.line = pairwise_distances(dataset_from_arrays([[0.0], [1.0], [3.0]]))
        rng = np.random.default_rng(17)
        self.data = dataset_from_arrays(rng.uniform(size=(20, 2)))
        self.dm = pairwise_distances(self.data)

    def test_gaussian_affinity(self):
        values = gaussian_affinity(self.line, 1.0).values
        self.assertAlmostEqual(values[0, 1], math.exp(-0.5))
        self.assertAlmostEqual(values[0, 2], math.exp(-4.5))
        self.assertAlmostEqual(values[1, 2], math.exp(-2.0))
        self.assertTrue(np.all(np.diag(values) == 0))
        for sigma in (0.0, -1.0, float("nan")):
            with self.assertRaises(ParameterError):
                gaussian_affinity(self.line, sigma)

    def test_local_scale_affinity(self):
        dm = pairwise_distances(dataset_from_arrays([[0.0], [1.0], [2.0]]))
        values = local_scale_affinity(dm, 1).values
        self.assertAlmostEqual(values[0, 1], math.exp(-1.0))
        self.assertAlmostEqual(values[0, 2], math.exp(-4.0))

    def test_self_tuning_affinity(self):
        dm = pairwise_distances(dataset_from_arrays([[0.0], [1.0], [2.0]]))
        values = self_tuning_affinity(dm, 2).values
        # scales are 2, 1 and 2
        self.assertAlmostEqual(values[0, 2], math.exp(-1.0))
        self.assertAlmostEqual(values[0, 1], math.exp(-0.5))
        self.assertTrue(np.array_equal(self_tuning_affinity(dm, 1).values, local_scale_affinity(dm, 1).values))

    def test_local_scale_duplicate_points(self):
        dm = pairwise_distances(dataset_from_arrays([[0.0], [0.0], [5.0]]))
        values = local_scale_affinity(dm, 1).values
        self.assertTrue(np.all(np.isfinite(values)))
        self.assertEqual(values[0, 1], 1.0)

    def test_cnn_without_common_neighbors_is_gaussian(self):
        g = build_epsilon_graph(self.dm, 0.0)
        self.assertTrue(np.array_equal(cnn_affinity(self.dm, 0.4, g).values, gaussian_affinity(self.dm, 0.4).values))

    def test_cnn_one_common_neighbor(self):
        dm = pairwise_distances(dataset_from_arrays([[0.0], [1.0], [2.0]]))
        values = cnn_affinity(dm, 1.0, build_epsilon_graph(dm, 1.5)).values
        self.assertAlmostEqual(values[0, 2], math.sqrt(gaussian_affinity(dm, 1.0).values[0, 2]))
        self.assertAlmostEqual(values[0, 1], math.exp(-0.5))

    def test_propagate_chain(self):
        values = np.array([[0.0, 0.8, 0.1], [0.8, 0.0, 0.5], [0.1, 0.5, 0.0]])
        relation = np.array([[False, True, False], [True, False, True], [False, True, False]])
        new_values, new_relation = propagate_neighbors(values, relation)
        self.assertEqual(new_values[0, 2], 0.5)
        self.assertEqual(new_values[2, 0], 0.5)
        self.assertTrue(np.all(new_relation | np.eye(3, dtype=bool)))

    def test_propagate_longer_chain(self):
        values = np.zeros((4, 4))
        for (i, j), value in {(0, 1): 0.9, (1, 2): 0.6, (2, 3): 0.7}.items():
            values[i, j] = values[j, i] = value
        new_values, _ = propagate_neighbors(values, values > 0)
        self.assertEqual(new_values[0, 2], 0.6)
        self.assertEqual(new_values[1, 3], 0.6)
        self.assertEqual(new_values[0, 3], 0.6)
        self.assertEqual(new_values[2, 3], 0.7)

    def test_propagate_closed_relation(self):
        values = np.array([[0.0, 0.3, 0.2], [0.3, 0.0, 0.9], [0.2, 0.9, 0.0]])
        relation = ~np.eye(3, dtype=bool)
        new_values, new_relation = propagate_neighbors(values, relation)
        self.assertTrue(np.array_equal(new_values, values))
        self.assertTrue(np.array_equal(new_relation, relation))

    def test_np_affinity_properties(self):
        gaussian = gaussian_affinity(self.dm, 0.3).values
        for epsilon in (0.15, 0.25):
            original = adjacency_matrix(build_epsilon_graph(self.dm, epsilon))
            values = np_affinity(self.dm, 0.3, epsilon).values
            _, final = propagate_neighbors(gaussian, original)
            self.assertTrue(np.array_equal(values, values.T))
            self.assertTrue(np.all(final[original]))
            self.assertTrue(np.array_equal(values[original], gaussian[original]))
            _, components = connected_components(original.astype(int), directed=False)
            same_component = components[:, None] == components[None, :]
            np.fill_diagonal(same_component, False)
            self.assertTrue(np.array_equal(final, same_component))
            # a propagated pair is never stronger than the related pairs it came through
            added = final & ~original
            if added.any():
                self.assertTrue(values[added].max() <= gaussian[original].max())
            self.assertTrue(np.array_equal(values[~final], gaussian[~final]))

    def test_np_affinity_zero_epsilon(self):
        self.assertTrue(np.array_equal(np_affinity(self.dm, 0.3, 0.0).values, gaussian_affinity(self.dm, 0.3).values))

    def test_snn_affinity(self):
        self.assertEqual(snn_affinity(knn_graph(((2, 3), (2, 3), (0, 1), (0, 1)), 2), 2).values[0, 1], 1.0)
        values = snn_affinity(knn_graph(((2, 3), (3, 4), (), (), ()), 2), 2).values
        self.assertEqual(values[0, 1], 0.5)
        self.assertEqual(values[0, 2], 0.0)
        with self.assertRaises(ParameterError):
            snn_affinity(build_epsilon_graph(self.dm, 0.3), 2)

    def test_csnn_affinity(self):
        self.assertEqual(csnn_affinity(knn_graph(((2,), (2,), ()), 2), 2).values[0, 1], 1.0)
        values = csnn_affinity(knn_graph(((3, 4), (3, 4), (4, 3), (), ()), 2), 2).values
        self.assertEqual(values[0, 1], 1.0)
        self.assertAlmostEqual(values[0, 2], 0.8)
        self.assertAlmostEqual(values[1, 2], 0.8)
        self.assertTrue(np.all(values >= 0) and np.all(values <= 1))

    def test_csnn_without_shared_neighbors(self):
        with self.assertLogs("cpclustering.affinity", level="WARNING"):
            values = csnn_affinity(knn_graph(((1,), (2,), (0,)), 1), 1).values
        self.assertTrue(np.all(values == 0))

    def test_pg_affinity(self):
        affinity = pg_affinity(self.line, 1.0)
        self.assertEqual(affinity.params["beta"], 2.0)
        self.assertAlmostEqual(affinity.values[0, 1], math.exp(-0.5))
        self.assertTrue(np.allclose(pg_affinity(self.line, 2.0).values, affinity.values ** 2, rtol=1e-12, atol=0))
        with self.assertRaises(ParameterError):
            pg_affinity(self.line, 0.0)

    def test_pg_affinity_duplicate_points(self):
        dm = pairwise_distances(dataset_from_arrays([[1.0], [1.0]]))
        self.assertEqual(pg_affinity(dm, 1.0).params["beta"], 1.0)

    def test_pg_affinity_single_point(self):
        dm = pairwise_distances(dataset_from_arrays([[1.0, 2.0]]))
        with self.assertRaisesRegex(ParameterError, "powered gaussian affinity needs at least two points"):
            pg_affinity(dm, 1.0)

    def test_cpsca_is_mean_of_directed_affinities(self):
        g = build_epsilon_graph(self.dm, 0.3)
        tau = TauMode.smoothed(8)
        directed = cpsc_asymmetric(self.data, g, NcmSpec.knn(3), tau).values
        symmetric = cpsca_symmetric(self.data, g, NcmSpec.knn(3), tau).values
        self.assertTrue(np.array_equal(symmetric, (directed + directed.T) / 2.0))
        self.assertTrue(np.all(directed >= 0) and np.all(directed <= 1))
        self.assertTrue(np.all(np.diag(directed) == 0))

    def test_conformal_affinities_reproducible(self):
        g = build_epsilon_graph(self.dm, 0.3)
        first = cpsca_symmetric(self.data, g, NcmSpec.kde(0.2), TauMode.smoothed(3)).values
        self.assertTrue(np.array_equal(first, cpsca_symmetric(self.data, g, NcmSpec.kde(0.2),
                                                              TauMode.smoothed(3)).values))

    def test_hybrid_affinity(self):
        g = build_epsilon_graph(self.dm, 0.3)
        values = hybrid_affinity(self.data, g, NcmSpec.knn(3), TauMode.smoothed(1), 0.2).values
        self.assertTrue(np.all(values >= 0) and np.all(values <= 2))
        self.assertTrue(np.all(np.diag(values) == 0))
        self.assertTrue(np.array_equal(values, values.T))

    def test_hybrid_duplicate_points(self):
        data = dataset_from_arrays(np.ones((5, 2)))
        g = build_epsilon_graph(pairwise_distances(data), 0.1)
        values = hybrid_affinity(data, g, NcmSpec.knn(2), TauMode.deterministic(1.0), 0.5).values
        self.assertTrue(np.all(values[~np.eye(5, dtype=bool)] == 2.0))

    def test_default_hybrid_sigma(self):
        self.assertAlmostEqual(default_hybrid_sigma(self.line, 1), 4.0 / 3.0)
        self.assertEqual(default_hybrid_sigma(pairwise_distances(dataset_from_arrays(np.zeros((3, 1)))), 2), 1.0)

    def test_write_affinity_csv(self):
        affinity = gaussian_affinity(self.dm, 0.3)
        with tempfile.TemporaryDirectory() as tmp_dir:
            file_path = os.path.join(tmp_dir, "affinity.csv")
            write_affinity_csv(affinity, file_path)
            reloaded = np.loadtxt(file_path, delimiter=",")
        self.assertTrue(np.array_equal(reloaded, affinity.values))

    def test_registry_covers_all_methods(self):
        self.assertEqual(set(METHOD_TO_AFFINITY_CLASS.keys()), set(Method))

    def test_builder_missing_parameters(self):
        with self.assertRaises(ConfigError) as context:
            get_affinity_builder(Method.NJW, AffinityParams())
        self.assertIn("--sigma", str(context.exception))
        with self.assertRaises(ConfigError) as context:
            get_affinity_builder(Method.NP, AffinityParams(sigma=0.1))
        self.assertIn("--epsilon", str(context.exception))
        with self.assertRaises(ConfigError) as context:
            get_affinity_builder(Method.CPSCA, AffinityParams(epsilon=0.2))
        self.assertIn("--k-nn", str(context.exception))
        with self.assertRaises(ConfigError):
            get_affinity_builder(Method.CNN, AffinityParams(sigma=0.1))
        with self.assertRaises(ConfigError):
            get_affinity_builder(Method.PG, AffinityParams(sigma=0.1))
        get_affinity_builder(Method.CPSCA, AffinityParams(epsilon=0.2, ncm=NcmKind.KDE))

    def test_builder_graphs(self):
        self.assertIsNone(get_affinity_builder(Method.NJW, AffinityParams(sigma=0.2)).build_graph(self.dm))
        g = get_affinity_builder(Method.CNN, AffinityParams(sigma=0.2, epsilon=0.3)).build_graph(self.dm)
        self.assertEqual(g.kind, GraphKind.EPSILON)
        g = get_affinity_builder(Method.CNN, AffinityParams(sigma=0.2, k_nn=3)).build_graph(self.dm)
        self.assertEqual(g.kind, GraphKind.KNN)

    def test_cpsc_builder_takes_smaller_direction(self):
        params = AffinityParams(epsilon=0.3, k_nn=3, tau=TauMode.smoothed(2))
        symmetric = get_affinity_builder(Method.CPSC, params).build(self.data, self.dm).values
        directed = cpsc_asymmetric(self.data, build_epsilon_graph(self.dm, 0.3), NcmSpec.knn(3),
                                   TauMode.smoothed(2), self.dm).values
        self.assertTrue(np.array_equal(symmetric, np.minimum(directed, directed.T)))

    def test_every_builder_gives_symmetric_affinity(self):
        params = AffinityParams(sigma=0.3, epsilon=0.3, k_nn=4, gamma=1.5, tau=TauMode.smoothed(5))
        for method in Method:
            affinity = get_affinity_builder(method, params).build(self.data, self.dm)
            self.assertEqual(affinity.n, self.data.n)
            self.assertTrue(affinity.is_symmetric(), method.value)
            self.assertTrue(np.all(np.diag(affinity.values) == 0), method.value)
            self.assertTrue(np.all(affinity.values >= 0), method.value)

    def test_hybrid_builder_default_sigma(self):
        affinity = get_affinity_builder(Method.HYBRID, AffinityParams(epsilon=0.3, k_nn=4)).build(self.data, self.dm)
        self.assertAlmostEqual(affinity.params["sigma"], default_hybrid_sigma(self.dm, 4))
