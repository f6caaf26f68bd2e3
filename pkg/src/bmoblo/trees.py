"""Finite weighted trees, maximal operators, and the induction inequality.

An alpha-tree here is a finite rooted tree of measurable "cells": every
internal node's measure is the sum of its children's measures and no child
is smaller than alpha times its parent.  A step function lives on the
leaves.  All the quantities of interest -- cell averages, BMO/BLO norms,
the natural maximal operator N (sup of plain averages over the cells
containing a point) and the classical one M (averages of |phi|) -- are
then exact finite computations.

Two executable facts drive the verification:

  * the ancestor supremum of averages at a node equals the infimum of the
    maximal function over the node (checked, not assumed);
  * running the restricted concavity of the shifted family A(.; L) down
    the tree bounds the average of the maximal function:
    <N phi>_K <= A(<phi>_K, <phi^2>_K; inf_K N phi) whenever the step
    function has BMO norm at most 1 on the subtree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bellman import eval_A_arrays, eval_F
from .errors import DomainError, PreconditionError, StructureError
from .geometry import AlphaContext

_REL_TOL = 1e-12


class TreeNode:
    """One cell: positive measure plus either children or a leaf value."""

    __slots__ = ("measure", "children", "value")

    def __init__(self, measure, children=None, value=None):
        self.measure = float(measure)
        self.children = list(children) if children is not None else None
        self.value = float(value) if value is not None else None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def __repr__(self):
        if self.is_leaf:
            return f"TreeNode(measure={self.measure}, value={self.value})"
        return f"TreeNode(measure={self.measure}, children=[{len(self.children)}])"


@dataclass
class AlphaTree:
    """A finite alpha-tree with a step function on its leaves."""

    alpha: float
    root: TreeNode

    def __post_init__(self):
        self._flat = None

    def invalidate(self):
        self._flat = None

    @property
    def flat(self) -> "FlatTree":
        if self._flat is None:
            validate(self)
            self._flat = _flatten(self)
        return self._flat


@dataclass(frozen=True)
class NodeStats:
    """Per-node averages and the running ancestor supremum of averages."""

    mean: float
    mean_sq: float
    ancestor_max: float


class FlatTree:
    """Preorder arrays for one tree; index 0 is the root.

    Everything downstream (norms, maximal functions, margins) reads these
    arrays; they are computed once per tree.
    """

    __slots__ = (
        "nodes",
        "parent",
        "measure",
        "mean",
        "mean_sq",
        "abs_mean",
        "anc_max",
        "abs_anc_max",
        "min_leaf",
        "sub_bmo_sq",
        "leaf_idx",
        "node_index",
        "paths",
    )


def validate(tree: AlphaTree) -> None:
    """Check the alpha-tree axioms; raises StructureError naming the node."""
    if not (0.0 < tree.alpha <= 0.5):
        raise StructureError("root", f"alpha={tree.alpha} outside (0, 1/2]")
    stack = [(tree.root, "root")]
    while stack:
        node, path = stack.pop()
        if not (node.measure > 0.0 and math.isfinite(node.measure)):
            raise StructureError(path, f"measure {node.measure} is not positive")
        if node.is_leaf:
            if node.value is None or not math.isfinite(node.value):
                raise StructureError(path, "leaf carries no finite value")
            continue
        if not node.children:
            raise StructureError(path, "internal node has no children")
        total = sum(c.measure for c in node.children)
        if abs(total - node.measure) > _REL_TOL * max(abs(node.measure), 1.0):
            raise StructureError(
                path,
                f"children measures sum to {total}, parent has {node.measure}",
            )
        for i, child in enumerate(node.children):
            if child.measure < tree.alpha * node.measure * (1.0 - _REL_TOL):
                raise StructureError(
                    f"{path}/{i}",
                    f"child measure {child.measure} below alpha * parent "
                    f"= {tree.alpha * node.measure}",
                )
            stack.append((child, f"{path}/{i}"))


def _flatten(tree: AlphaTree) -> FlatTree:
    f = FlatTree()
    nodes, parent, paths = [], [], []
    stack = [(tree.root, -1, "root")]
    while stack:
        node, par, path = stack.pop()
        i = len(nodes)
        nodes.append(node)
        parent.append(par)
        paths.append(path)
        if not node.is_leaf:
            for ci, child in enumerate(reversed(node.children)):
                stack.append((child, i, f"{path}/{len(node.children) - 1 - ci}"))
    n = len(nodes)
    f.nodes = nodes
    f.parent = np.array(parent, dtype=np.int64)
    f.paths = paths
    f.node_index = {id(node): i for i, node in enumerate(nodes)}
    f.measure = np.array([nd.measure for nd in nodes])
    integ = np.zeros(n)
    integ_sq = np.zeros(n)
    integ_abs = np.zeros(n)
    min_leaf = np.full(n, np.inf)
    leaf = np.array([nd.is_leaf for nd in nodes])
    # Preorder guarantees children come after parents; aggregate bottom-up.
    for i in range(n - 1, -1, -1):
        nd = nodes[i]
        if nd.is_leaf:
            integ[i] = nd.measure * nd.value
            integ_sq[i] = nd.measure * nd.value * nd.value
            integ_abs[i] = nd.measure * abs(nd.value)
            min_leaf[i] = nd.value
        if f.parent[i] >= 0:
            p = f.parent[i]
            integ[p] += integ[i]
            integ_sq[p] += integ_sq[i]
            integ_abs[p] += integ_abs[i]
            min_leaf[p] = min(min_leaf[p], min_leaf[i])
    f.mean = integ / f.measure
    f.mean_sq = integ_sq / f.measure
    f.abs_mean = integ_abs / f.measure
    f.min_leaf = min_leaf
    anc = np.empty(n)
    abs_anc = np.empty(n)
    for i in range(n):
        p = f.parent[i]
        anc[i] = f.mean[i] if p < 0 else max(anc[p], f.mean[i])
        abs_anc[i] = f.abs_mean[i] if p < 0 else max(abs_anc[p], f.abs_mean[i])
    f.anc_max = anc
    f.abs_anc_max = abs_anc
    var = np.maximum(f.mean_sq - f.mean**2, 0.0)
    sub = var.copy()
    for i in range(n - 1, 0, -1):
        p = f.parent[i]
        sub[p] = max(sub[p], sub[i])
    f.sub_bmo_sq = sub
    f.leaf_idx = np.flatnonzero(leaf)
    return f


def _node_index(tree: AlphaTree, node) -> int:
    if node is None:
        return 0
    if isinstance(node, (int, np.integer)):
        return int(node)
    try:
        return tree.flat.node_index[id(node)]
    except KeyError:
        raise DomainError("node does not belong to this tree") from None


def stats(tree: AlphaTree) -> list[NodeStats]:
    """Per-node averages in preorder (index 0 = root)."""
    f = tree.flat
    return [
        NodeStats(float(f.mean[i]), float(f.mean_sq[i]), float(f.anc_max[i]))
        for i in range(len(f.nodes))
    ]


def node_paths(tree: AlphaTree) -> list[str]:
    return list(tree.flat.paths)


def bmo_norm(tree: AlphaTree, node=None) -> float:
    """sup over cells of (<phi^2> - <phi>^2)^(1/2), exact finite maximum."""
    f = tree.flat
    return float(math.sqrt(f.sub_bmo_sq[_node_index(tree, node)]))


def blo_norm(tree: AlphaTree) -> float:
    """sup over cells of <phi> - (min leaf value under the cell)."""
    f = tree.flat
    return float(np.max(f.mean - f.min_leaf))


def maximal(tree: AlphaTree, kind: str = "natural", outside: float | None = None):
    """Per-leaf values of the maximal operator, in leaf preorder.

    kind "natural" takes plain averages, "classical" averages of |phi|.
    `outside` optionally seeds the chain maximum (e.g. 0.0 when the ambient
    function vanishes outside the root cell); by default only the tree's
    own cells compete.  Exact for step functions: averages over sub-leaf
    sets equal the leaf value, so the supremum is a finite maximum over the
    ancestor chain including the leaf itself.
    """
    f = tree.flat
    if kind == "natural":
        chain = f.anc_max
    elif kind == "classical":
        chain = f.abs_anc_max
    else:
        raise DomainError(f"unknown maximal operator kind {kind!r}")
    vals = chain[f.leaf_idx]
    if outside is not None:
        vals = np.maximum(vals, outside)
    return vals


def leaf_measures(tree: AlphaTree):
    f = tree.flat
    return f.measure[f.leaf_idx]


def inf_maximal(tree: AlphaTree, node=None, kind: str = "natural") -> float:
    """inf over the node of the maximal function.

    Computed as the supremum of averages over the node's ancestors-or-self;
    the equality of the two descriptions is a testable fact (see
    tests), not an assumption of this routine's callers.
    """
    f = tree.flat
    i = _node_index(tree, node)
    return float(f.anc_max[i] if kind == "natural" else f.abs_anc_max[i])


def _mean_maximal_under(tree: AlphaTree, i: int, kind: str):
    """Measure-weighted average of the maximal function over node i."""
    f = tree.flat
    chain = f.anc_max if kind == "natural" else f.abs_anc_max
    total = 0.0
    stack = [i]
    while stack:
        j = stack.pop()
        nd = f.nodes[j]
        if nd.is_leaf:
            total += nd.measure * chain[j]
        else:
            stack.extend(
                f.node_index[id(c)] for c in nd.children
            )
    return total / f.measure[i]


def verify_induction(tree: AlphaTree, node, ctx: AlphaContext) -> float:
    """Margin A(<phi>_K, <phi^2>_K; inf_K N phi) - <N phi>_K (>= 0).

    Requires the step function to have BMO norm at most 1 on the subtree
    at K (the caller rescales otherwise).
    """
    f = tree.flat
    i = _node_index(tree, node)
    norm_sq = f.sub_bmo_sq[i]
    if norm_sq > (1.0 + 1e-12) ** 2:
        raise PreconditionError(
            f"subtree BMO norm {math.sqrt(norm_sq)} exceeds 1; rescale first"
        )
    L = float(f.anc_max[i])
    # Rounding can leave the cell point a few ulps above the strip when the
    # norm sits exactly at 1; the clamp is within the precondition slack.
    x2 = min(float(f.mean_sq[i]), float(f.mean[i]) ** 2 + 1.0)
    rhs = float(eval_A_arrays(f.mean[i], x2, L, ctx)[0])
    return rhs - _mean_maximal_under(tree, i, "natural")


@dataclass(frozen=True)
class TheoremMargins:
    """Margins of the decay inequality and its norm corollary at one node.

    margin_n / margin_m : L + F_alpha(t) * ||phi||_BMO - <(N|M) phi>_K,
    with t measured against <phi>_K for N and <|phi|>_K for M (the
    classical operator reduces through |phi|, whose BMO norm is no larger).
    blo_margin_n / blo_margin_m : ||phi||_BMO(subtree) minus the BLO norm
    of the maximal function treated as a new step function on the subtree.
    """

    margin_n: float
    margin_m: float
    blo_margin_n: float
    blo_margin_m: float
    L: float
    t: float
    norm: float

    @property
    def min_margin(self) -> float:
        return min(self.margin_n, self.margin_m, self.blo_margin_n, self.blo_margin_m)


def subtree(tree: AlphaTree, node) -> AlphaTree:
    i = _node_index(tree, node)
    return AlphaTree(alpha=tree.alpha, root=tree.flat.nodes[i])


def with_leaf_values(tree: AlphaTree, values) -> AlphaTree:
    """Copy of the tree carrying new leaf values (leaf preorder)."""
    values = list(np.asarray(values, dtype=float))
    if len(values) != len(tree.flat.leaf_idx):
        raise DomainError("value count does not match leaf count")
    it = iter(values)

    def clone(node: TreeNode) -> TreeNode:
        if node.is_leaf:
            return TreeNode(node.measure, value=next(it))
        return TreeNode(node.measure, children=[clone(c) for c in node.children])

    return AlphaTree(alpha=tree.alpha, root=clone(tree.root))


def _subtree_leaf_positions(tree: AlphaTree, i: int):
    """Positions (within the global leaf order) of the leaves under node i."""
    f = tree.flat
    pos_of = {int(j): k for k, j in enumerate(f.leaf_idx)}
    out = []
    stack = [i]
    while stack:
        j = stack.pop()
        nd = f.nodes[j]
        if nd.is_leaf:
            out.append(pos_of[j])
        else:
            stack.extend(f.node_index[id(c)] for c in nd.children)
    return sorted(out)


def verify_main_theorem(tree: AlphaTree, node, ctx: AlphaContext) -> TheoremMargins:
    """Decay-inequality and norm-corollary margins at one node."""
    f = tree.flat
    i = _node_index(tree, node)
    norm = math.sqrt(f.sub_bmo_sq[i])
    L_n = float(f.anc_max[i])
    t_n = max(L_n - float(f.mean[i]), 0.0)
    rhs_n = L_n + float(eval_F(t_n, ctx)) * norm
    margin_n = rhs_n - _mean_maximal_under(tree, i, "natural")

    L_m = float(f.abs_anc_max[i])
    t_m = max(L_m - float(f.abs_mean[i]), 0.0)
    rhs_m = L_m + float(eval_F(t_m, ctx)) * norm
    margin_m = rhs_m - _mean_maximal_under(tree, i, "classical")

    sub = subtree(tree, i)
    positions = _subtree_leaf_positions(tree, i)
    n_leaf = maximal(tree, "natural")[positions]
    m_leaf = maximal(tree, "classical")[positions]
    blo_n = norm - blo_norm(with_leaf_values(sub, n_leaf))
    blo_m = norm - blo_norm(with_leaf_values(sub, m_leaf))
    return TheoremMargins(
        margin_n=margin_n,
        margin_m=margin_m,
        blo_margin_n=blo_n,
        blo_margin_m=blo_m,
        L=L_n,
        t=t_n,
        norm=norm,
    )


def verify_all_nodes(tree: AlphaTree, ctx: AlphaContext):
    """Vectorized per-node margins for whole-tree verification.

    Returns dict with arrays over preorder nodes: induction margin (where
    the subtree BMO norm is at most 1; NaN elsewhere), the N/M decay
    margins, and the key-observation residual
    |ancestor max - min over leaves below of N phi|.
    """
    f = tree.flat
    n = len(f.nodes)
    chain_n = f.anc_max
    chain_m = f.abs_anc_max
    # Mean of N phi and min of N phi over each node, bottom-up.
    mean_n = np.zeros(n)
    mean_m = np.zeros(n)
    min_n = np.full(n, np.inf)
    for i in range(n - 1, -1, -1):
        nd = f.nodes[i]
        if nd.is_leaf:
            mean_n[i] = nd.measure * chain_n[i]
            mean_m[i] = nd.measure * chain_m[i]
            min_n[i] = chain_n[i]
        p = f.parent[i]
        if p >= 0:
            mean_n[p] += mean_n[i]
            mean_m[p] += mean_m[i]
            min_n[p] = min(min_n[p], min_n[i])
    mean_n /= f.measure
    mean_m /= f.measure

    ind_ok = f.sub_bmo_sq <= (1.0 + 1e-12) ** 2
    x2 = np.minimum(f.mean_sq, f.mean**2 + 1.0)
    rhs = eval_A_arrays(f.mean, x2, f.anc_max, ctx)
    induction = np.where(ind_ok, rhs - mean_n, np.nan)

    norm = np.sqrt(f.sub_bmo_sq)
    t_n = np.maximum(f.anc_max - f.mean, 0.0)
    t_m = np.maximum(f.abs_anc_max - f.abs_mean, 0.0)
    main_n = f.anc_max + eval_F(t_n, ctx) * norm - mean_n
    main_m = f.abs_anc_max + eval_F(t_m, ctx) * norm - mean_m

    key_obs = np.abs(f.anc_max - min_n)
    return {
        "induction": induction,
        "main_n": main_n,
        "main_m": main_m,
        "key_obs": key_obs,
        "mean_N": mean_n,
        "mean_M": mean_m,
    }


def truncate(tree: AlphaTree, depth: int) -> AlphaTree:
    """Conditional expectation at a generation: depth-m cells become leaves
    carrying their averages."""
    f = tree.flat

    def build(node: TreeNode, d: int) -> TreeNode:
        if node.is_leaf or d == 0:
            i = f.node_index[id(node)]
            return TreeNode(node.measure, value=float(f.mean[i]))
        return TreeNode(
            node.measure, children=[build(c, d - 1) for c in node.children]
        )

    return AlphaTree(alpha=tree.alpha, root=build(tree.root, depth))


def shift_values(tree: AlphaTree, c: float) -> AlphaTree:
    """The tree carrying phi + c."""
    vals = np.array(
        [tree.flat.nodes[j].value for j in tree.flat.leaf_idx], dtype=float
    )
    return with_leaf_values(tree, vals + c)


def random_tree(
    alpha: float,
    rng: np.random.Generator,
    max_depth: int = 6,
    leaf_prob: float = 0.35,
    target_bmo: float = 1.0,
) -> AlphaTree:
    """Random alpha-tree with a normalized step function.

    Arity 2..min(4, floor(1/alpha)); child fractions alpha + (1 - a*alpha)
    times a Dirichlet sample, which keeps every fraction >= alpha (plain
    rejection never terminates at alpha = 1/2, where the only valid split
    is exactly even).  Leaf values are standard normal, then affinely
    rescaled about the root mean so the BMO norm equals target_bmo.
    """
    max_arity = min(4, int(1.0 / alpha + 1e-9))

    def build(depth: int) -> TreeNode:
        if depth >= max_depth or (depth > 0 and rng.uniform() < leaf_prob):
            return TreeNode(1.0, value=float(rng.normal()))
        a = int(rng.integers(2, max_arity + 1)) if max_arity > 2 else 2
        fracs = alpha + (1.0 - a * alpha) * rng.dirichlet(np.ones(a))
        children = [build(depth + 1) for _ in range(a)]
        node = TreeNode(1.0, children=children)
        for c, frac in zip(children, fracs):
            _scale_measures(c, frac)
        return node

    root = build(0)
    tree = AlphaTree(alpha=alpha, root=root)
    if target_bmo is None:
        return tree
    for _ in range(64):
        if bmo_norm(tree) >= 1e-6:
            break
        vals = rng.normal(size=len(tree.flat.leaf_idx))
        tree = with_leaf_values(tree, vals)
    # Two exact rescales about the root mean, then a hair of shrinkage so
    # accumulated rounding cannot push any cell's variance above the target
    # (the induction step feeds cell points to the strip evaluator).
    for shrink in (1.0, 1.0 - 1e-11):
        norm = bmo_norm(tree)
        mean = tree.flat.mean[0]
        lam = shrink * target_bmo / norm
        vals = np.array(
            [tree.flat.nodes[j].value for j in tree.flat.leaf_idx], dtype=float
        )
        tree = with_leaf_values(tree, mean + lam * (vals - mean))
    return tree


def _scale_measures(node: TreeNode, factor: float) -> None:
    node.measure *= factor
    if not node.is_leaf:
        for c in node.children:
            _scale_measures(c, factor)


# ---------------------------------------------------------------------------
# JSON wire format: {"alpha": a, "root": node} with node either
# {"measure": m, "children": [...]} or {"measure": m, "value": v}.
# ---------------------------------------------------------------------------


def _node_from_json(obj, path: str) -> TreeNode:
    if not isinstance(obj, dict):
        raise StructureError(path, "node must be a JSON object")
    if "measure" not in obj:
        raise StructureError(path, "node lacks a measure")
    measure = obj["measure"]
    if not isinstance(measure, (int, float)):
        raise StructureError(path, "measure must be a number")
    has_children = "children" in obj
    has_value = "value" in obj
    if has_children == has_value:
        raise StructureError(path, "node must have exactly one of children/value")
    if has_value:
        if not isinstance(obj["value"], (int, float)):
            raise StructureError(path, "leaf value must be a number")
        return TreeNode(measure, value=float(obj["value"]))
    if not isinstance(obj["children"], list) or not obj["children"]:
        raise StructureError(path, "children must be a non-empty list")
    children = [
        _node_from_json(c, f"{path}/{i}") for i, c in enumerate(obj["children"])
    ]
    return TreeNode(measure, children=children)


def tree_from_json(obj) -> AlphaTree:
    """Parse and validate the JSON tree format."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "alpha" not in obj or "root" not in obj:
        raise StructureError("root", "top level must carry alpha and root")
    tree = AlphaTree(alpha=float(obj["alpha"]), root=_node_from_json(obj["root"], "root"))
    validate(tree)
    return tree


def tree_to_json(tree: AlphaTree) -> dict:
    def enc(node: TreeNode):
        if node.is_leaf:
            return {"measure": node.measure, "value": node.value}
        return {"measure": node.measure, "children": [enc(c) for c in node.children]}

    return {"alpha": tree.alpha, "root": enc(tree.root)}
