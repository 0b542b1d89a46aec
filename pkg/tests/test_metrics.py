import itertools
import logging
import unittest

import numpy as np
from sklearn.metrics import normalized_mutual_info_score, silhouette_score

from cpclustering.commons import ParameterError
from cpclustering.data_manager import dataset_from_arrays, pairwise_distances
from cpclustering.metrics import ari, nmi, clustering_error, silhouette, contingency_table

logger = logging.getLogger("Metrics tests")


def brute_force_ari(labels_true, labels_pred):
    same_both = same_true = same_pred = total = 0
    for i, j in itertools.combinations(range(len(labels_true)), 2):
        in_true = labels_true[i] == labels_true[j]
        in_pred = labels_pred[i] == labels_pred[j]
        same_true += int(in_true)
        same_pred += int(in_pred)
        same_both += int(in_true and in_pred)
        total += 1
    expected = same_true * same_pred / total
    max_index = (same_true + same_pred) / 2.0
    if max_index - expected == 0:
        return 1.0 if same_true == same_pred == same_both else 0.0
    return (same_both - expected) / (max_index - expected)


def brute_force_ce(labels_true, labels_pred):
    true_ids = sorted(set(labels_true))
    pred_ids = sorted(set(labels_pred))
    size = max(len(true_ids), len(pred_ids))
    best = 0
    for matching in itertools.permutations(range(size), len(pred_ids)):
        matched = 0
        for pred_pos, true_pos in enumerate(matching):
            if true_pos < len(true_ids):
                matched += sum(1 for t, p in zip(labels_true, labels_pred)
                               if t == true_ids[true_pos] and p == pred_ids[pred_pos])
        best = max(best, matched)
    return 1.0 - best / len(labels_true)


class TestMetrics(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(filename=None, level="ERROR", format='%(asctime)s - %(name)s - %(levelname)s: %(message)s')

    def test_contingency_table(self):
        table = contingency_table([0, 0, 1, 1, 2], [1, 1, 1, 0, 0])
        self.assertEqual(table.total, 5)
        self.assertEqual(table.counts.sum(), 5)
        self.assertEqual(list(table.row_sums), [2, 2, 1])
        self.assertEqual(list(table.col_sums), [2, 3])

    def test_ari(self):
        self.assertEqual(ari([0, 0, 1, 1], [0, 0, 1, 1]), 1.0)
        self.assertEqual(ari([0, 0, 1, 1], [0, 1, 1, 1]), 0.0)
        self.assertEqual(ari([0, 0, 1, 1, 2], [2, 2, 0, 0, 1]), 1.0)
        self.assertEqual(ari([0, 0, 1, 2], [1, 1, 0, 2]), ari([0, 0, 1, 2], [2, 2, 1, 0]))

    def test_ari_zero_denominator(self):
        self.assertEqual(ari([0, 0, 0], [5, 5, 5]), 1.0)
        self.assertEqual(ari([0, 1, 2], [0, 1, 2]), 1.0)
        self.assertEqual(ari([0, 0, 0], [0, 1, 2]), 0.0)

    def test_ari_errors(self):
        with self.assertRaises(ParameterError):
            ari([0], [0])
        with self.assertRaises(ParameterError):
            ari([0, 1, 1], [0, 1])

    def test_nmi(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1], [1, 1, 0, 0]), 1.0)
        self.assertEqual(nmi([0, 0, 1, 1], [0, 1, 0, 1]), 0.0)
        self.assertEqual(nmi([0, 0, 0], [0, 0, 0]), 1.0)
        self.assertEqual(nmi([0, 0, 1], [0, 0, 0]), 0.0)
        self.assertAlmostEqual(nmi([0, 1, 2, 2], [0, 2, 1, 1]), nmi([0, 1, 2, 2], [1, 0, 2, 2]), places=12)
        with self.assertRaises(ParameterError):
            nmi([0, 1], [0, 1, 1])

    def test_clustering_error(self):
        self.assertEqual(clustering_error([0, 1, 1, 2], [0, 1, 1, 2]), 0.0)
        self.assertEqual(clustering_error([0, 0, 1, 1], [1, 1, 0, 0]), 0.0)
        self.assertEqual(clustering_error([0, 0, 0, 1], [0, 0, 1, 1]), 0.25)
        self.assertEqual(clustering_error([0, 0, 0, 0], [0, 1, 2, 3]), 0.75)
        with self.assertRaises(ParameterError):
            clustering_error([0, 1], [0])

    def test_against_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            labels_true = rng.integers(0, int(rng.integers(1, 5)), size=n).tolist()
            labels_pred = rng.integers(0, int(rng.integers(1, 5)), size=n).tolist()
            self.assertAlmostEqual(ari(labels_true, labels_pred), brute_force_ari(labels_true, labels_pred),
                                   places=12)
            self.assertEqual(clustering_error(labels_true, labels_pred), brute_force_ce(labels_true, labels_pred))
            if len(set(labels_true)) > 1 and len(set(labels_pred)) > 1:
                self.assertAlmostEqual(nmi(labels_true, labels_pred),
                                       normalized_mutual_info_score(labels_true, labels_pred,
                                                                    average_method="geometric"), places=10)
            value = nmi(labels_true, labels_pred)
            self.assertTrue(0.0 <= value <= 1.0)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(2)
        labels_true = rng.integers(0, 4, size=30)
        labels_pred = rng.integers(0, 3, size=30)
        relabeled = np.array([2, 0, 1])[labels_pred]
        self.assertAlmostEqual(ari(labels_true, labels_pred), ari(labels_true, relabeled), places=12)
        self.assertAlmostEqual(nmi(labels_true, labels_pred), nmi(labels_true, relabeled), places=12)
        self.assertEqual(clustering_error(labels_true, labels_pred), clustering_error(labels_true, relabeled))

    def test_silhouette_examples(self):
        dm = pairwise_distances(dataset_from_arrays([[0.0], [0.0], [5.0], [5.0]]))
        self.assertEqual(silhouette(dm, [0, 0, 1, 1]), 1.0)
        dm = pairwise_distances(dataset_from_arrays([[0.0], [0.1], [10.0], [10.1]]))
        self.assertTrue(silhouette(dm, [0, 1, 0, 1]) < silhouette(dm, [0, 0, 1, 1]))
        self.assertAlmostEqual(silhouette(dm, [1, 1, 0, 0]), silhouette(dm, [0, 0, 1, 1]), places=12)

    def test_silhouette_errors(self):
        dm = pairwise_distances(dataset_from_arrays([[0.0], [1.0], [2.0]]))
        with self.assertRaises(ParameterError):
            silhouette(dm, [0, 0, 0])
        with self.assertRaises(ParameterError):
            silhouette(dm, [0, 1])
        with self.assertRaises(ParameterError):
            silhouette(pairwise_distances(dataset_from_arrays([[0.0], [1.0]])), [0, 1])
        self.assertEqual(silhouette(dm, [0, 1, 2]), 0.0)

    def test_silhouette_matches_reference(self):
        rng = np.random.default_rng(7)
        data = dataset_from_arrays(rng.normal(size=(25, 2)))
        dm = pairwise_distances(data)
        labels = rng.integers(0, 3, size=25)
        labels[:3] = [0, 1, 2]
        self.assertAlmostEqual(silhouette(dm, labels),
                               silhouette_score(np.asarray(dm.dist), labels, metric="precomputed"), places=12)
