"""Adaptation trees and stacked per-node weight vectors.

Leaves of an adaptation tree carry target domains; internal nodes capture
structure shared by their descendants. Node weights are concatenated into
one flat vector in pre-order so a single solver run can fit them jointly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, TreeValidationError


@dataclass(frozen=True)
class TreeNode:
    """A named tree node; exactly the leaves carry a domain identifier."""

    name: str
    children: tuple = ()
    domain: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.children and self.domain is not None:
            raise TreeValidationError(
                f"internal node {self.name!r} must not carry a domain"
            )
        if not self.children and self.domain is None:
            raise TreeValidationError(
                f"leaf node {self.name!r} must carry a domain"
            )

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class AdaptationTree:
    """A validated tree plus the derived lookups used by the objective.

    `node_order` is the canonical pre-order traversal (children in
    declaration order); it fixes the layout of flattened weight stacks.
    """

    root: TreeNode
    node_order: tuple
    parent: dict
    children: dict
    leaf_domains: dict       # leaf name -> domain id
    domain_leaves: dict      # domain id -> leaf name
    descendant_domains: dict  # node name -> tuple of leaf domain ids under it

    @property
    def node_count(self) -> int:
        return len(self.node_order)

    @property
    def domains(self) -> tuple:
        """Domains in leaf pre-order."""
        return tuple(self.leaf_domains[name] for name in self.node_order
                     if name in self.leaf_domains)

    def node(self, name: str) -> TreeNode:
        for node, _ in _walk(self.root):
            if node.name == name:
                return node
        raise TreeValidationError(f"unknown node {name!r}")

    def to_dict(self) -> dict:
        """Nested {name, domain?, children?} records mirroring the file format."""
        def rec(node: TreeNode) -> dict:
            out = {"name": node.name}
            if node.is_leaf:
                out["domain"] = node.domain
            else:
                out["children"] = [rec(c) for c in node.children]
            return out
        return rec(self.root)


def _walk(root: TreeNode):
    """Iterative pre-order traversal yielding (node, parent_name)."""
    stack = [(root, None)]
    while stack:
        node, parent = stack.pop()
        yield node, parent
        for child in reversed(node.children):
            stack.append((child, node.name))


def _node_from_raw(raw) -> TreeNode:
    if isinstance(raw, TreeNode):
        return raw
    if not isinstance(raw, dict):
        raise TreeValidationError(
            f"tree node must be a mapping, got {type(raw).__name__}"
        )
    name = raw.get("name")
    if not name or not isinstance(name, str):
        raise TreeValidationError("every tree node needs a non-empty string name")
    children_raw = raw.get("children") or []
    domain = raw.get("domain")
    if children_raw and domain is not None:
        raise TreeValidationError(
            f"internal node {name!r} must not carry a domain"
        )
    children = tuple(_node_from_raw(c) for c in children_raw)
    if not children and domain is None:
        raise TreeValidationError(f"leaf node {name!r} must carry a domain")
    return TreeNode(name=name, children=children, domain=domain)


def validate_tree(spec) -> AdaptationTree:
    """Build an AdaptationTree from a TreeNode or nested dict description.

    Accepts either the root record itself or a {"root": record} wrapper.
    Chains (an internal node with a single child) are legal. Raises
    TreeValidationError for an empty tree, duplicate node names, a leaf
    without a domain, a domain on an internal node, or a domain assigned
    to more than one leaf.
    """
    if isinstance(spec, dict) and "root" in spec:
        spec = spec["root"]
    if spec is None or spec == {} or spec == []:
        raise TreeValidationError("empty tree")
    root = _node_from_raw(spec)

    order = []
    parent: dict = {}
    children: dict = {}
    leaf_domains: dict = {}
    for node, parent_name in _walk(root):
        if node.name in parent:
            raise TreeValidationError(f"duplicate node name {node.name!r}")
        order.append(node.name)
        parent[node.name] = parent_name
        children[node.name] = tuple(c.name for c in node.children)
        if node.is_leaf:
            leaf_domains[node.name] = node.domain

    domain_leaves: dict = {}
    for leaf, domain in leaf_domains.items():
        if domain in domain_leaves:
            raise TreeValidationError(
                f"domain {domain!r} is assigned to more than one leaf"
            )
        domain_leaves[domain] = leaf

    descendant: dict = {}

    def fill(node: TreeNode) -> tuple:
        if node.is_leaf:
            descendant[node.name] = (node.domain,)
        else:
            acc = []
            for c in node.children:
                acc.extend(fill(c))
            descendant[node.name] = tuple(acc)
        return descendant[node.name]

    fill(root)

    return AdaptationTree(
        root=root,
        node_order=tuple(order),
        parent=parent,
        children=children,
        leaf_domains=leaf_domains,
        domain_leaves=domain_leaves,
        descendant_domains=descendant,
    )


@dataclass(frozen=True, eq=False)
class WeightStack:
    """Per-node weight vectors keyed by node name, in canonical order."""

    per_node: dict
    node_order: tuple

    def __post_init__(self):
        if set(self.per_node) != set(self.node_order):
            raise DimensionError(
                "weight stack keys do not match the tree's node names"
            )
        lengths = {v.shape[0] for v in self.per_node.values()}
        if len(lengths) > 1:
            raise DimensionError(
                f"all node weight vectors must share one length, got {lengths}"
            )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.per_node[name]

    @property
    def slice_length(self) -> int:
        return next(iter(self.per_node.values())).shape[0]


def stack_flatten(stack: WeightStack) -> np.ndarray:
    """Concatenate node vectors following the canonical node order."""
    return np.concatenate([stack.per_node[name] for name in stack.node_order])


def stack_unflatten(flat, tree: AdaptationTree, category_count: int,
                    feature_dim: int) -> WeightStack:
    """Inverse of stack_flatten for a given tree and slice size."""
    flat = np.asarray(flat, dtype=np.float64)
    slice_len = category_count * feature_dim
    expected = tree.node_count * slice_len
    if flat.ndim != 1 or flat.shape[0] != expected:
        raise DimensionError(
            f"flat stack has length {flat.shape[0] if flat.ndim == 1 else flat.shape}, "
            f"expected {tree.node_count} nodes x {slice_len} = {expected}"
        )
    per_node = {
        name: flat[i * slice_len:(i + 1) * slice_len].copy()
        for i, name in enumerate(tree.node_order)
    }
    return WeightStack(per_node=per_node, node_order=tree.node_order)


def uniform_stack(tree: AdaptationTree, vector) -> WeightStack:
    """A stack with every node set to a copy of the same vector."""
    vector = np.asarray(vector, dtype=np.float64)
    return WeightStack(
        per_node={name: vector.copy() for name in tree.node_order},
        node_order=tree.node_order,
    )
