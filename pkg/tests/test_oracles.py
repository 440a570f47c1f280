"""Tests for the oracles module."""

import pickle
import unittest
from unittest.mock import MagicMock, patch

import numpy as np

from mural.domain import FiniteDomain, GroupDistribution, HypothesisClass, Instance
from mural.errors import ContractViolation
from mural.oracles import LabeledSet, Oracle, QueryLedger, Sample, StreamFactory
from mural.regions import Region

REAL_SEED_SEQUENCE = np.random.SeedSequence


def three_point_instance():
    groups = (
        GroupDistribution([0.2, 0.3, 0.5], [0.9, 0.1, 0.5]),
        GroupDistribution([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]),
    )
    return Instance(FiniteDomain(3), groups, HypothesisClass([[1, 1, 1], [1, -1, 1]]))


class TestQueryLedger(unittest.TestCase):
    """Test cases for the QueryLedger class."""

    def setUp(self):
        """Set up test fixtures."""
        self.ledger = QueryLedger(2)

    def test_charges_accumulate_per_group(self):
        self.ledger.charge_labels(0, 3)
        self.ledger.charge_labels(1)
        self.ledger.charge_unlabeled(1, 5)
        self.assertEqual(self.ledger.label_queries, [3, 1])
        self.assertEqual(self.ledger.unlabeled_queries, [0, 5])
        self.assertEqual(self.ledger.total_labels, 4)
        self.assertEqual(self.ledger.total_unlabeled, 5)

    def test_negative_charge_rejected(self):
        with self.assertRaises(ContractViolation):
            self.ledger.charge_labels(0, -1)

    def test_merge_maps_groups(self):
        other = QueryLedger(1)
        other.charge_labels(0, 7)
        other.charge_unlabeled(0, 2)
        self.ledger.merge(other, groups=[1])
        self.assertEqual(self.ledger.snapshot(), {"label_queries": [0, 7], "unlabeled_queries": [0, 2]})

    def test_snapshot_round_trip_and_pickle(self):
        self.ledger.charge_labels(1, 4)
        again = QueryLedger.from_snapshot(self.ledger.snapshot())
        self.assertEqual(again.label_queries, [0, 4])
        restored = pickle.loads(pickle.dumps(self.ledger))
        restored.charge_labels(0)
        self.assertEqual(restored.label_queries, [1, 4])


class TestLabeledSet(unittest.TestCase):

    def test_counts_and_iteration(self):
        labeled = LabeledSet(0, np.array([2, 0, 1]), np.array([0, 1, 0]))
        self.assertEqual(len(labeled), 4)
        self.assertTrue(labeled)
        samples = list(labeled)
        self.assertEqual(samples, [Sample(0, 1, 0), Sample(0, 1, 0), Sample(1, -1, 0), Sample(2, 1, 0)])
        self.assertEqual(labeled.counts.tolist(), [2, 1, 1])

    def test_from_samples(self):
        labeled = LabeledSet.from_samples([Sample(1, -1, 1), Sample(1, 1, 1)], 3, group=1)
        self.assertEqual(labeled.positives.tolist(), [0, 1, 0])
        self.assertEqual(labeled.negatives.tolist(), [0, 1, 0])
        with self.assertRaises(ContractViolation):
            LabeledSet.from_samples([Sample(0, None, 0)], 3)

    def test_mistakes(self):
        labeled = LabeledSet(0, np.array([2, 0, 1]), np.array([0, 1, 0]))
        labels = np.array([[1, 1, 1], [-1, -1, -1]])
        self.assertEqual(labeled.mistakes(labels).tolist(), [1.0, 3.0])

    def test_empty(self):
        empty = LabeledSet.empty(0, 4)
        self.assertEqual(len(empty), 0)
        self.assertFalse(empty)


class TestStreamFactory(unittest.TestCase):

    def test_streams_are_reproducible_and_independent(self):
        a = StreamFactory(42).generator("phase", 1, 2).random(5)
        b = StreamFactory(42).generator("phase", 1, 2).random(5)
        c = StreamFactory(42).generator("phase", 0, 2).random(5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_child_paths_differ(self):
        streams = StreamFactory(7)
        a = streams.child("final").generator("x").random()
        b = streams.generator("x").random()
        self.assertNotEqual(a, b)

    @patch("mural.oracles.np.random.SeedSequence")
    def test_spawn_key_layout(self, mock_seq):
        mock_seq.return_value = REAL_SEED_SEQUENCE(0)
        StreamFactory(3, path=(9,)).generator("p", 2, 4)
        seed, = mock_seq.call_args.args
        key = mock_seq.call_args.kwargs["spawn_key"]
        self.assertEqual(seed, 3)
        self.assertEqual(key[0], 9)
        self.assertEqual(key[2:], (2, 4))


class TestOracle(unittest.TestCase):
    """Test cases for the Oracle class."""

    def setUp(self):
        """Set up test fixtures."""
        self.inst = three_point_instance()
        self.oracle = Oracle(self.inst)

    def test_label_query_uses_eta(self):
        rng = MagicMock()
        rng.random.return_value = 0.85
        self.assertEqual(self.oracle.label_query(0, 0, rng), 1)
        rng.random.return_value = 0.95
        self.assertEqual(self.oracle.label_query(0, 0, rng), -1)
        self.assertEqual(self.oracle.ledger.label_queries, [2, 0])

    def test_label_query_outside_support(self):
        with self.assertRaises(ContractViolation):
            self.oracle.label_query(1, 0, np.random.default_rng(0))
        self.assertEqual(self.oracle.ledger.total_labels, 0)

    def test_label_query_outside_domain(self):
        for x in (-1, 3):
            with self.subTest(x=x):
                with self.assertRaises(ContractViolation):
                    self.oracle.label_query(0, x, np.random.default_rng(0))
        self.assertEqual(self.oracle.ledger.total_labels, 0)

    def test_unlabeled_sample_respects_region(self):
        rng = np.random.default_rng(1)
        region = Region.from_indices([1, 2], 3)
        draws = {self.oracle.unlabeled_sample(0, region, rng) for _ in range(50)}
        self.assertTrue(draws <= {1, 2})
        self.assertEqual(self.oracle.ledger.unlabeled_queries, [50, 0])

    def test_zero_mass_region_returns_none(self):
        region = Region.from_indices([0, 1], 3)
        self.assertIsNone(self.oracle.unlabeled_sample(1, region, np.random.default_rng(0)))
        self.assertIsNone(self.oracle.draw_unlabeled_counts(1, region, 10, np.random.default_rng(0)))
        self.assertEqual(self.oracle.ledger.unlabeled_queries, [0, 2])

    def test_draw_labeled_set_on_zero_mass_region(self):
        region = Region.from_indices([0], 3)
        labeled = self.oracle.draw_labeled_set(1, region, 25, np.random.default_rng(0))
        self.assertEqual(len(labeled), 0)
        self.assertEqual(self.oracle.ledger.label_queries, [0, 0])
        self.assertEqual(self.oracle.ledger.unlabeled_queries, [0, 1])

    def test_draw_labeled_set_charges_every_label(self):
        labeled = self.oracle.draw_labeled_set(0, Region.full(3), 1000, np.random.default_rng(3))
        self.assertEqual(len(labeled), 1000)
        self.assertEqual(self.oracle.ledger.label_queries, [1000, 0])
        self.assertEqual(self.oracle.ledger.unlabeled_queries, [1000, 0])

    def test_zero_sample_size_charges_nothing(self):
        labeled = self.oracle.draw_labeled_set(0, Region.full(3), 0, np.random.default_rng(3))
        self.assertEqual(len(labeled), 0)
        self.assertEqual(self.oracle.ledger.snapshot(), {"label_queries": [0, 0], "unlabeled_queries": [0, 0]})

    def test_draw_unlabeled_points(self):
        points = self.oracle.draw_unlabeled_points(1, Region.full(3), 20, np.random.default_rng(0))
        self.assertEqual(points.tolist(), [2] * 20)
        self.assertEqual(self.oracle.ledger.unlabeled_queries, [0, 20])

    def test_shadow_oracle_is_uncharged(self):
        shadow = self.oracle.shadow()
        shadow.draw_labeled_set(0, Region.full(3), 50, np.random.default_rng(0))
        self.assertEqual(shadow.ledger.total_labels, 0)
        self.assertEqual(self.oracle.ledger.total_labels, 0)

    @patch("mural.oracles.Oracle._conditional_pmf")
    def test_counts_follow_conditional_pmf(self, mock_pmf):
        mock_pmf.return_value = np.array([0.0, 1.0, 0.0])
        counts = self.oracle.draw_unlabeled_counts(0, Region.full(3), 12, np.random.default_rng(0))
        self.assertEqual(counts.tolist(), [0, 12, 0])

    def test_draw_frequencies_match_renormalized_marginal(self):
        n = 100_000
        for region, expected in ((Region.full(3), [0.2, 0.3, 0.5]),
                                 (Region.from_indices([1, 2], 3), [0.0, 0.375, 0.625])):
            with self.subTest(region=region.members().tolist()):
                counts = self.oracle.draw_unlabeled_counts(0, region, n, np.random.default_rng(17))
                self.assertEqual(int(counts.sum()), n)
                expected = np.asarray(expected)
                sigma = np.sqrt(n * expected * (1 - expected))
                self.assertTrue(np.all(np.abs(counts - n * expected) <= 4 * sigma))

    def test_empirical_label_rate_matches_eta(self):
        counts = np.array([0, 0, 20000])
        labeled = self.oracle.label_counts(0, counts, np.random.default_rng(11))
        rate = labeled.positives[2] / 20000
        # four standard deviations of a fair coin over 20000 draws
        self.assertLess(abs(rate - 0.5), 4 * 0.5 / np.sqrt(20000))

    def test_counts_outside_support_rejected(self):
        with self.assertRaises(ContractViolation):
            self.oracle.label_counts(1, np.array([1, 0, 0]), np.random.default_rng(0))

    def test_ledger_group_count_checked(self):
        with self.assertRaises(ContractViolation):
            Oracle(self.inst, QueryLedger(3))


if __name__ == "__main__":
    unittest.main()
