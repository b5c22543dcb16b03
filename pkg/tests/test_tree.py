"""Tree validation and weight-stack layout."""

import numpy as np
import pytest

from hassvm.errors import DimensionError, TreeValidationError
from hassvm.tree import (
    TreeNode,
    WeightStack,
    stack_flatten,
    stack_unflatten,
    uniform_stack,
    validate_tree,
)


def three_target_tree():
    """Root with one direct leaf and one internal node over two leaves."""
    return {
        "name": "N0",
        "children": [
            {"name": "T1", "domain": "T1"},
            {"name": "N1", "children": [
                {"name": "T2", "domain": "T2"},
                {"name": "T3", "domain": "T3"},
            ]},
        ],
    }


class TestValidateTree:
    def test_nested_topology(self):
        tree = validate_tree(three_target_tree())
        assert tree.node_count == 5
        assert tree.node_order == ("N0", "T1", "N1", "T2", "T3")
        assert tree.parent == {"N0": None, "T1": "N0", "N1": "N0",
                               "T2": "N1", "T3": "N1"}
        assert tree.descendant_domains["N0"] == ("T1", "T2", "T3")
        assert tree.descendant_domains["N1"] == ("T2", "T3")
        assert tree.domains == ("T1", "T2", "T3")

    def test_single_leaf_tree(self):
        tree = validate_tree({"name": "only", "domain": "d"})
        assert tree.node_count == 1
        assert tree.leaf_domains == {"only": "d"}

    def test_root_wrapper_accepted(self):
        tree = validate_tree({"root": {"name": "only", "domain": "d"}})
        assert tree.node_count == 1

    def test_chain_is_legal(self):
        tree = validate_tree({
            "name": "a", "children": [
                {"name": "b", "children": [{"name": "c", "domain": "d"}]},
            ],
        })
        assert tree.node_order == ("a", "b", "c")

    def test_duplicate_domain(self):
        with pytest.raises(TreeValidationError, match="more than one leaf"):
            validate_tree({"name": "r", "children": [
                {"name": "x", "domain": "d"},
                {"name": "y", "domain": "d"},
            ]})

    def test_duplicate_name(self):
        with pytest.raises(TreeValidationError, match="duplicate node name"):
            validate_tree({"name": "r", "children": [
                {"name": "x", "domain": "d1"},
                {"name": "x", "domain": "d2"},
            ]})

    def test_leaf_without_domain(self):
        with pytest.raises(TreeValidationError, match="must carry a domain"):
            validate_tree({"name": "r", "children": [{"name": "x"}]})

    def test_domain_on_internal_node(self):
        with pytest.raises(TreeValidationError, match="must not carry"):
            validate_tree({"name": "r", "domain": "d",
                           "children": [{"name": "x", "domain": "e"}]})

    def test_empty_tree(self):
        with pytest.raises(TreeValidationError, match="empty"):
            validate_tree(None)
        with pytest.raises(TreeValidationError, match="empty"):
            validate_tree({"root": None})

    def test_treenode_input(self):
        node = TreeNode("r", children=(TreeNode("x", domain="d"),))
        assert validate_tree(node).node_count == 2

    def test_random_mutations_rejected(self):
        # Every single-defect mutation of a valid description must fail.
        rng = np.random.default_rng(5)
        for _ in range(50):
            spec = three_target_tree()
            mutation = rng.integers(4)
            if mutation == 0:
                spec["children"][0]["name"] = "N1"          # duplicate name
            elif mutation == 1:
                spec["children"][0]["domain"] = "T2"        # duplicate domain
            elif mutation == 2:
                del spec["children"][1]["children"][0]["domain"]  # bare leaf
            else:
                spec["children"][1]["domain"] = "X"         # domain on internal
            with pytest.raises(TreeValidationError):
                validate_tree(spec)


class TestWeightStack:
    def test_flat_length(self):
        tree = validate_tree({"name": "r", "children": [
            {"name": "a", "domain": "da"},
            {"name": "b", "domain": "db"},
        ]})
        stack = uniform_stack(tree, np.arange(4.0))  # K=2, n=2
        assert stack_flatten(stack).shape == (12,)

    def test_round_trip(self):
        tree = validate_tree(three_target_tree())
        rng = np.random.default_rng(0)
        flat = rng.normal(size=5 * 6)
        stack = stack_unflatten(flat, tree, category_count=3, feature_dim=2)
        np.testing.assert_array_equal(stack_flatten(stack), flat)
        for i, name in enumerate(tree.node_order):
            np.testing.assert_array_equal(stack[name], flat[i * 6:(i + 1) * 6])

    def test_wrong_length(self):
        tree = validate_tree(three_target_tree())
        with pytest.raises(DimensionError):
            stack_unflatten(np.zeros(11), tree, 1, 2)

    def test_key_set_must_match(self):
        tree = validate_tree({"name": "r", "domain": "d"})
        with pytest.raises(DimensionError):
            WeightStack(per_node={"other": np.zeros(2)},
                        node_order=tree.node_order)
