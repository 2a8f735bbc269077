from collections import Counter
from fractions import Fraction

import pytest

from generators.stopping import harmonic_instance
from model.serialization import TreeParseError, deserialize, load_tree, save_tree, serialize
from model.tree import (
    KIND_FEEDBACK,
    VIOLATION_MEAN,
    VIOLATION_PARTITION,
    VIOLATION_PROBABILITY,
    VIOLATION_RAGGED,
    InstanceTree,
    Node,
    TreeBuilder,
    perturb_leaves,
    sample_path,
    validate_structure,
    validate_supermartingale,
)
from tests.helpers import chain, one_step

HALF = Fraction(1, 2)


class TestValidateSupermartingale:
    def test_single_node_is_valid(self):
        assert validate_supermartingale(chain([5])) == []

    def test_mean_equal_to_value_is_valid(self):
        assert validate_supermartingale(one_step(1, [(0, HALF), (2, HALF)])) == []

    def test_mean_above_value_is_reported_at_root(self):
        violations = validate_supermartingale(one_step(1, [(0, HALF), (3, HALF)]))
        assert [(v.kind, v.node_id) for v in violations] == [(VIOLATION_MEAN, 0)]
        assert "3/2" in violations[0].detail

    def test_tolerance_absorbs_small_excess(self):
        tree = one_step(1, [(0, HALF), (Fraction(201, 100), HALF)])
        assert validate_supermartingale(tree) != []
        assert validate_supermartingale(tree, Fraction(1, 100)) == []

    def test_default_tolerance_absorbs_rounding(self):
        overshoot = 1 + Fraction(1, 10**12)
        tree = one_step(3, [(0, HALF), (6 * overshoot, HALF)])
        assert validate_supermartingale(tree) == []
        assert validate_supermartingale(tree, 0) != []

    def test_default_tolerance_is_relative(self):
        tree = one_step(10**9, [(0, HALF), (2 * 10**9 + 1, HALF)])
        assert validate_supermartingale(tree) == []
        assert validate_supermartingale(tree, Fraction(1, 10**9), relative=False) != []

    def test_probabilities_must_sum_to_one(self):
        tree = one_step(1, [(0, Fraction(1, 2)), (1, Fraction(2, 5))])
        kinds = {v.kind for v in validate_supermartingale(tree)}
        assert VIOLATION_PROBABILITY in kinds

    def test_ragged_leaves_are_reported(self):
        builder = TreeBuilder()
        root = builder.add(2)
        builder.add(1, parent=root, prob=HALF)
        mid = builder.add(1, parent=root, prob=HALF)
        builder.add(1, parent=mid, prob=1)
        kinds = {v.kind for v in validate_supermartingale(builder.build())}
        assert VIOLATION_RAGGED in kinds

    def test_harmonic_instance_is_a_martingale(self):
        assert validate_supermartingale(harmonic_instance(4)) == []


def test_feedback_children_must_partition_parent():
    builder = TreeBuilder(KIND_FEEDBACK)
    root = builder.add(0, scenarios=[0, 1, 2])
    builder.add(0, parent=root, prob=HALF, scenarios=[0])
    builder.add(0, parent=root, prob=HALF, scenarios=[0, 1])
    kinds = {v.kind for v in validate_structure(builder.build())}
    assert VIOLATION_PARTITION in kinds


def test_depths_are_recomputed_from_root():
    nodes = [
        Node(id=7, value=Fraction(1), children=((3, Fraction(1)),), depth=5),
        Node(id=3, value=Fraction(1), depth=9),
    ]
    tree = InstanceTree(nodes, root=7)
    assert tree.node(7).depth == 0
    assert tree.node(3).depth == 1
    assert tree.horizon == 1


class TestSamplePath:
    def test_chain_is_always_sampled(self):
        tree = chain([3, 2, 1])
        assert sample_path(tree, 0).values == (3, 2, 1)
        assert sample_path(tree, 99).node_ids == (0, 1, 2)

    def test_degenerate_distribution(self):
        tree = one_step(1, [(1, 1)])
        assert all(sample_path(tree, seed).node_ids == (0, 1) for seed in range(20))

    def test_frequency_matches_edge_probability(self):
        tree = one_step(1, [(0, HALF), (2, HALF)])
        counts = Counter(sample_path(tree, seed).node_ids[-1] for seed in range(10_000))
        assert 0.45 <= counts[1] / 10_000 <= 0.55

    def test_same_seed_same_path(self):
        tree = harmonic_instance(6)
        assert sample_path(tree, 42) == sample_path(tree, 42)


class TestPerturbLeaves:
    def test_alpha_one_is_identity(self):
        tree = harmonic_instance(3)
        assert perturb_leaves(tree, 1) == tree

    def test_max_rule_scales_value(self):
        assert perturb_leaves(chain([3]), 2).root_node.value == 6

    def test_scaling_only_leaves_breaks_the_martingale(self):
        scaled = perturb_leaves(harmonic_instance(3), 2, "max", scope="leaves")
        assert len(validate_supermartingale(scaled)) >= 1

    def test_random_rule_stays_in_range_and_is_seeded(self):
        tree = harmonic_instance(3)
        a = perturb_leaves(tree, 3, "random", seed=5)
        b = perturb_leaves(tree, 3, "random", seed=5)
        assert a == b
        for node in tree:
            assert node.value <= a.node(node.id).value <= 3 * node.value

    def test_alpha_below_one_is_rejected(self):
        with pytest.raises(ValueError):
            perturb_leaves(chain([1]), Fraction(1, 2))


class TestSerialization:
    def test_single_node_round_trip(self):
        tree = chain([Fraction(7, 3)])
        assert deserialize(serialize(tree)) == tree

    def test_harmonic_round_trip_through_file(self, tmp_path):
        tree = harmonic_instance(5)
        path = tmp_path / "harmonic.json"
        save_tree(tree, path)
        assert load_tree(path) == tree

    def test_rationals_are_written_as_strings(self):
        text = serialize(one_step(1, [(0, Fraction(1, 3)), (Fraction(3, 2), Fraction(2, 3))]))
        assert '"1/3"' in text
        assert '"3/2"' in text

    def test_bad_probability_sum_parses_but_fails_validation(self):
        text = """
        {"kind": "supermartingale", "root": 0, "nodes": [
          {"id": 0, "value": "1", "children": [{"id": 1, "prob": "9/10"}]},
          {"id": 1, "value": "1", "children": []}
        ]}
        """
        tree = deserialize(text)
        assert any(v.kind == VIOLATION_PROBABILITY for v in validate_supermartingale(tree))

    def test_malformed_value_reports_path(self):
        text = '{"kind": "supermartingale", "root": 0, "nodes": [{"id": 0, "value": 1.5, "children": []}]}'
        with pytest.raises(TreeParseError) as excinfo:
            deserialize(text)
        assert "nodes" in excinfo.value.path

    def test_invalid_json(self):
        with pytest.raises(TreeParseError):
            deserialize("{not json")
