import unittest

import numpy as np

from rfbpnet.pairing import (IntegrityError, PairingError, PairSet, build_pairs, diagnose_rules,
                             pair_stats)
from rfbpnet.utils import PairRecord, ParameterError

from helpers import grid_labels, label_dataset


def assert_rules(test, pairset, dataset):
    for idx_a, idx_b, y_s, id_label in pairset.records:
        same_user = dataset.identity[idx_a] == dataset.identity[idx_b]
        same_behavior = dataset.behavior[idx_a] == dataset.behavior[idx_b]
        if y_s == 0:
            test.assertTrue(same_user and not same_behavior)
            test.assertEqual(id_label, dataset.identity[idx_a])
        else:
            test.assertTrue(same_behavior and not same_user)
            test.assertEqual(id_label, -1)


class BuildPairsTestCase(unittest.TestCase):
    def test_rules_hold_on_random_datasets(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            size = int(rng.integers(20, 80))
            identity = rng.integers(0, int(rng.integers(2, 5)), size)
            behavior = rng.integers(0, int(rng.integers(2, 5)), size)
            identity[:2] = [0, 1]
            behavior[:2] = [0, 1]
            dataset = label_dataset(identity, behavior, seed=seed)
            if len(diagnose_rules(identity, behavior)) == 2:
                continue
            pairset = build_pairs(dataset, 200, seed)
            self.assertEqual(len(pairset), 200)
            assert_rules(self, pairset, dataset)

    def test_grid_example(self):
        dataset = label_dataset(*grid_labels(2, 2, 1))
        pairset = build_pairs(dataset, 10, seed=0)
        for record in pairset.records:
            self.assertIn((min(record.idx_a, record.idx_b), max(record.idx_a, record.idx_b)),
                          {(0, 1), (2, 3), (0, 2), (1, 3)})
        assert_rules(self, pairset, dataset)

    def test_same_seed_same_pairs(self):
        dataset = label_dataset(*grid_labels(3, 3, 2))
        self.assertEqual(build_pairs(dataset, 50, 4).records, build_pairs(dataset, 50, 4).records)
        self.assertNotEqual(build_pairs(dataset, 50, 4).records,
                            build_pairs(dataset, 50, 5).records)

    def test_equal_balance(self):
        dataset = label_dataset(*grid_labels(3, 4, 3))
        pairset = build_pairs(dataset, 101, 0, balance='equal')
        stats = pair_stats(pairset, dataset)
        self.assertEqual(stats['y_s'], {'0': 51, '1': 50})

    def test_single_user_fails(self):
        dataset = label_dataset(np.zeros(6, dtype=int), np.arange(6) % 3)
        with self.assertRaises(PairingError):
            build_pairs(dataset, 10)

    def test_single_behavior_fails(self):
        dataset = label_dataset(np.arange(6) % 3, np.zeros(6, dtype=int))
        with self.assertRaises(PairingError):
            build_pairs(dataset, 10)

    def test_equal_balance_needs_both_rules(self):
        # every user performs a different behavior: only rule 1 is impossible
        identity = np.array([0, 0, 1, 1])
        behavior = np.array([0, 1, 2, 3])
        dataset = label_dataset(identity, behavior)
        self.assertIn(1, diagnose_rules(identity, behavior))
        pairset = build_pairs(dataset, 20, 0)
        self.assertTrue(all(record.y_s == 0 for record in pairset.records))
        with self.assertRaises(PairingError):
            build_pairs(dataset, 20, 0, balance='equal')

    def test_bad_arguments(self):
        dataset = label_dataset(*grid_labels(2, 2, 2))
        with self.assertRaises(ParameterError):
            build_pairs(dataset, 10, balance='half')
        with self.assertRaises(ParameterError):
            build_pairs(dataset, -1)

    def test_zero_pairs(self):
        self.assertEqual(len(build_pairs(label_dataset(*grid_labels(2, 2, 2)), 0)), 0)


class PairSetTestCase(unittest.TestCase):
    def test_subset_is_prefix(self):
        dataset = label_dataset(*grid_labels(3, 3, 2))
        pairset = build_pairs(dataset, 40, 1)
        subset = pairset.subset(10)
        self.assertEqual(subset.records, pairset.records[:10])
        self.assertEqual(subset.dataset_id, pairset.dataset_id)
        with self.assertRaises(ParameterError):
            pairset.subset(41)

    def test_arrays(self):
        pairset = PairSet([PairRecord(0, 1, 0, 2), PairRecord(3, 4, 1, -1)])
        idx_a, idx_b, y_s, id_label = pairset.arrays()
        np.testing.assert_array_equal(idx_a, [0, 3])
        np.testing.assert_array_equal(id_label, [2, -1])
        self.assertEqual(PairSet().arrays()[0].shape, (0,))


class PairStatsTestCase(unittest.TestCase):
    def test_counts(self):
        dataset = label_dataset(*grid_labels(2, 2, 1))
        pairset = PairSet([PairRecord(0, 1, 0, 0), PairRecord(1, 0, 0, 0),
                           PairRecord(0, 2, 1, -1)])
        stats = pair_stats(pairset, dataset)
        self.assertEqual(stats['total'], 3)
        self.assertEqual(stats['y_s'], {'0': 2, '1': 1})
        self.assertEqual(stats['id_label'], {'-1': 1, '0': 2})
        self.assertAlmostEqual(stats['duplicate_rate'], 1 / 3)

    def test_integrity(self):
        dataset = label_dataset(*grid_labels(2, 2, 1))
        with self.assertRaises(IntegrityError):
            pair_stats(PairSet([PairRecord(0, 9, 0, 0)]), dataset)
        with self.assertRaises(IntegrityError):
            pair_stats(PairSet([PairRecord(0, 1, 1, -1)]), dataset)
