"""Tests for the domain module."""

import json
import unittest
from fractions import Fraction

import numpy as np

from mural.domain import (
    FiniteDomain,
    GroupDistribution,
    HypothesisClass,
    Instance,
    conditional_loss,
    default_vc_dim,
    is_group_realizable,
    region_mass,
    true_group_loss,
    true_max_loss,
)
from mural.errors import ContractViolation
from mural.regions import Region
from mural.scenarios import example1_gadget, random_instance


def two_point_instance():
    groups = (
        GroupDistribution([0.25, 0.75], [1.0, 0.0]),
        GroupDistribution([1.0, 0.0], [0.5, 0.5]),
    )
    hclass = HypothesisClass([[1, 1], [1, -1], [-1, -1]])
    return Instance(FiniteDomain(2), groups, hclass, name="two-point")


class TestGroupDistribution(unittest.TestCase):
    """Validation of marginals and conditionals."""

    def test_rejects_marginal_not_summing_to_one(self):
        with self.assertRaises(ContractViolation):
            GroupDistribution([0.5, 0.4], [0.0, 1.0])

    def test_accepts_sum_within_tolerance(self):
        dist = GroupDistribution([0.5, 0.5 + 1e-13], [0.0, 1.0])
        self.assertEqual(dist.size, 2)

    def test_rejects_negative_mass_and_bad_eta(self):
        with self.assertRaises(ContractViolation):
            GroupDistribution([1.5, -0.5], [0.0, 1.0])
        with self.assertRaises(ContractViolation):
            GroupDistribution([0.5, 0.5], [0.0, 1.2])

    def test_rejects_mismatched_lengths(self):
        with self.assertRaises(ContractViolation):
            GroupDistribution([0.5, 0.5], [0.0, 1.0, 1.0])

    def test_fractions_stay_exact(self):
        dist = GroupDistribution([Fraction(1, 3), Fraction(2, 3)], [Fraction(1, 2), Fraction(1)])
        self.assertTrue(dist.is_exact)
        loss = dist.loss(np.array([1, 1]))
        self.assertIsInstance(loss, Fraction)
        self.assertEqual(loss, Fraction(1, 6))
        self.assertEqual(dist.mass([True, False]), Fraction(1, 3))

    def test_arrays_are_read_only(self):
        dist = GroupDistribution([0.5, 0.5], [0.0, 1.0])
        with self.assertRaises(ValueError):
            dist.marginal[0] = 1.0


class TestHypothesisClass(unittest.TestCase):
    """Hypothesis materialization and deduplication."""

    def test_duplicates_collapse_to_first_occurrence(self):
        hclass = HypothesisClass([[1, -1], [1, 1], [1, -1]])
        self.assertEqual(hclass.size, 2)
        self.assertEqual(hclass[0].labels.tolist(), [1, -1])
        self.assertEqual(hclass[1].labels.tolist(), [1, 1])

    def test_labels_must_be_signs(self):
        with self.assertRaises(ContractViolation):
            HypothesisClass([[1, 0]])

    def test_empty_class_rejected(self):
        with self.assertRaises(ContractViolation):
            HypothesisClass([])

    def test_default_vc_dim(self):
        self.assertEqual(default_vc_dim(1), 1)
        self.assertEqual(default_vc_dim(32), 5)
        self.assertEqual(default_vc_dim(33), 6)
        self.assertEqual(HypothesisClass([[1], [-1]]).vc_dim, 1)

    def test_hypothesis_call(self):
        h = HypothesisClass([[1, -1, 1]])[0]
        self.assertEqual([h(x) for x in range(3)], [1, -1, 1])
        with self.assertRaises(ContractViolation):
            HypothesisClass([[1]])[3]


class TestInstance(unittest.TestCase):
    """Exact losses and instance-level helpers."""

    def setUp(self):
        self.inst = two_point_instance()

    def test_true_group_loss(self):
        h_pos, h_mixed, h_neg = list(self.inst.hclass)
        self.assertAlmostEqual(true_group_loss(self.inst, h_pos, 0), 0.75)
        self.assertAlmostEqual(true_group_loss(self.inst, h_mixed, 0), 0.0)
        self.assertAlmostEqual(true_group_loss(self.inst, h_neg, 0), 0.25)
        self.assertAlmostEqual(true_group_loss(self.inst, h_pos, 1), 0.5)

    def test_loss_matrix_matches_per_hypothesis_losses(self):
        for h in self.inst.hclass:
            for g in range(self.inst.num_groups):
                self.assertAlmostEqual(self.inst.loss_matrix[h.id, g], float(true_group_loss(self.inst, h, g)))
            self.assertAlmostEqual(self.inst.max_loss_vector[h.id], float(true_max_loss(self.inst, h)))

    def test_region_mass_and_conditional_loss(self):
        region = Region(np.array([False, True]))
        self.assertAlmostEqual(region_mass(self.inst, 0, region), 0.75)
        self.assertEqual(region_mass(self.inst, 1, region), 0.0)
        h_pos = self.inst.hypothesis(0)
        self.assertAlmostEqual(conditional_loss(self.inst, h_pos, 0, region), 1.0)
        self.assertEqual(conditional_loss(self.inst, h_pos, 1, region), 0.0)

    def test_region_shape_checked(self):
        with self.assertRaises(ContractViolation):
            region_mass(self.inst, 0, np.array([True]))

    def test_group_index_checked(self):
        with self.assertRaises(ContractViolation):
            true_group_loss(self.inst, self.inst.hypothesis(0), 2)

    def test_mismatched_sizes_rejected(self):
        with self.assertRaises(ContractViolation):
            Instance(FiniteDomain(3), self.inst.groups, self.inst.hclass)

    def test_restrict_to_group(self):
        single = self.inst.restrict_to_group(1)
        self.assertEqual(single.num_groups, 1)
        self.assertEqual(single.groups[0], self.inst.groups[1])
        self.assertIs(single.hclass, self.inst.hclass)

    def test_group_realizability(self):
        self.assertFalse(is_group_realizable(self.inst))
        realizable = Instance(FiniteDomain(2), (self.inst.groups[0],), self.inst.hclass)
        self.assertTrue(is_group_realizable(realizable))

    def test_json_round_trip(self):
        inst = random_instance((8, 10, 2), seed=3)
        data = json.loads(inst.to_json())
        self.assertEqual(set(data), {"name", "domain_size", "groups", "hypotheses", "vc_dim"})
        again = Instance.from_json(inst.to_json())
        self.assertEqual(again.groups, inst.groups)
        np.testing.assert_array_equal(again.hclass.labels, inst.hclass.labels)
        self.assertEqual(again.hclass.vc_dim, inst.hclass.vc_dim)

    def test_from_dict_reports_missing_key(self):
        with self.assertRaises(ContractViolation):
            Instance.from_dict({"domain_size": 2, "groups": []})

    def test_exact_instance_losses(self):
        inst = example1_gadget()
        self.assertTrue(inst.is_exact)
        self.assertEqual(true_max_loss(inst, inst.hypothesis(0)), Fraction(7, 12))


if __name__ == "__main__":
    unittest.main()
