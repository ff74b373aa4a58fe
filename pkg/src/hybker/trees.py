"""Rooted multifurcating trees and the combinatorial subroutines on tree sets.

A :class:`Tree` stores dense integer vertex ids with parent pointers and
ordered child lists.  Leaves are identified with their labels.  The
functions at the bottom of the module implement refinement testing, common
pendant subtree detection, chain verification and the maximum common
q-star chain search used by the kernelizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Iterator, Sequence, Union

Nested = Union[str, tuple]


class TreeError(ValueError):
    """Raised for structurally invalid trees or incompatible tree sets."""


class ChainOrderError(RuntimeError):
    """The common chain order is ambiguous.

    Only happens when the tree set has a nontrivial common pendant subtree,
    which the chain routines exclude as a precondition.
    """


class Tree:
    """Rooted phylogenetic tree on a set of string labels.

    Vertices are ``0..len(parent)-1``.  ``parent[root] == -1``.  Only
    leaves carry labels.
    """

    def __init__(self, parent: list[int], children: list[list[int]],
                 label: list[str | None], root: int):
        self.parent = parent
        self.children = children
        self.label = label
        self.root = root

    # -- construction -----------------------------------------------------

    @classmethod
    def from_nested(cls, nested: Nested) -> "Tree":
        """Build a tree from nested tuples of labels, e.g. ``(("a", "b"), "c")``.

        Internal vertices with a single child are suppressed.
        """
        parent: list[int] = []
        children: list[list[int]] = []
        label: list[str | None] = []

        def build(node: Nested, par: int) -> int:
            while not isinstance(node, str) and len(node) == 1:
                node = node[0]
            v = len(parent)
            parent.append(par)
            children.append([])
            if isinstance(node, str):
                label.append(node)
                return v
            if len(node) == 0:
                raise TreeError("empty internal vertex")
            label.append(None)
            for child in node:
                children[v].append(build(child, v))
            return v

        build(nested, -1)
        tree = cls(parent, children, label, 0)
        tree._check_leaves()
        return tree

    def _check_leaves(self) -> None:
        seen: set[str] = set()
        for v, lab in enumerate(self.label):
            if self.children[v]:
                continue
            if lab is None:
                raise TreeError("unlabelled leaf")
            if lab in seen:
                raise TreeError(f"duplicate leaf label {lab!r}")
            seen.add(lab)

    def to_nested(self, v: int | None = None) -> Nested:
        if v is None:
            v = self.root
        if not self.children[v]:
            return self.label[v]
        return tuple(self.to_nested(c) for c in self.children[v])

    # -- basic queries ------------------------------------------------------

    def __len__(self) -> int:
        return len(self.parent)

    def __repr__(self) -> str:
        from .newick import serialize_tree
        return f"Tree({serialize_tree(self)!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return self.leaves == other.leaves and self.clusters == other.clusters

    def __hash__(self) -> int:
        return hash(self.clusters)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    @cached_property
    def leaf_vertex(self) -> dict[str, int]:
        return {lab: v for v, lab in enumerate(self.label) if lab is not None}

    @cached_property
    def leaves(self) -> frozenset[str]:
        return frozenset(self.leaf_vertex)

    def vertex(self, label: str) -> int:
        return self.leaf_vertex[label]

    def parent_of(self, label: str) -> int:
        return self.parent[self.leaf_vertex[label]]

    @cached_property
    def _euler(self) -> tuple[list[int], list[int], list[int]]:
        n = len(self.parent)
        pre, post, depth = [0] * n, [0] * n, [0] * n
        clock = 0
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                post[v] = clock
                clock += 1
                continue
            pre[v] = clock
            clock += 1
            stack.append((v, True))
            for c in reversed(self.children[v]):
                depth[c] = depth[v] + 1
                stack.append((c, False))
        return pre, post, depth

    def is_ancestor(self, u: int, v: int) -> bool:
        """True iff there is a directed path from ``u`` to ``v`` (``u == v`` allowed)."""
        pre, post, _ = self._euler
        return pre[u] <= pre[v] and post[v] <= post[u]

    def depth(self, v: int) -> int:
        return self._euler[2][v]

    def lca(self, u: int, v: int) -> int:
        while not self.is_ancestor(u, v):
            u = self.parent[u]
        return u

    @cached_property
    def leafsets(self) -> list[frozenset[str]]:
        """Leaf-descendant set of every vertex."""
        out: list[frozenset[str] | None] = [None] * len(self.parent)
        order = sorted(range(len(self.parent)), key=self.depth, reverse=True)
        for v in order:
            if not self.children[v]:
                out[v] = frozenset((self.label[v],))
            else:
                out[v] = frozenset().union(*(out[c] for c in self.children[v]))
        return out  # type: ignore[return-value]

    @cached_property
    def clusters(self) -> frozenset[frozenset[str]]:
        """Leaf sets of all internal vertices (the root contributes the full set)."""
        return frozenset(self.leafsets[v] for v in range(len(self.parent))
                         if self.children[v])

    @cached_property
    def max_outdegree(self) -> int:
        return max(len(ch) for ch in self.children)

    def internal_vertices(self) -> Iterator[int]:
        return (v for v in range(len(self.parent)) if self.children[v])

    def min_label(self, v: int) -> str:
        return min(self.leafsets[v])

    # -- derived trees --------------------------------------------------------

    def restrict(self, keep: Iterable[str]) -> "Tree":
        """Subtree induced by ``keep`` with degree-2 vertices suppressed."""
        keep = frozenset(keep)
        if not keep:
            raise TreeError("cannot restrict a tree to the empty set")

        def walk(v: int) -> Nested | None:
            if not self.children[v]:
                return self.label[v] if self.label[v] in keep else None
            kids = [w for w in (walk(c) for c in self.children[v]) if w is not None]
            if not kids:
                return None
            if len(kids) == 1:
                return kids[0]
            return tuple(kids)

        return Tree.from_nested(walk(self.root))

    def delete_leaves(self, labels: Iterable[str]) -> "Tree":
        return self.restrict(self.leaves - frozenset(labels))

    def relabel(self, mapping: dict[str, str]) -> "Tree":
        label = [None if lab is None else mapping.get(lab, lab) for lab in self.label]
        tree = Tree(list(self.parent), [list(c) for c in self.children], label, self.root)
        tree._check_leaves()
        return tree

    def pendant_subtree_vertices(self, leafset: frozenset[str]) -> tuple[int, list[int]] | None:
        """Locate the pendant subtree of this tree whose leaf set is ``leafset``.

        Returns ``(v, kids)`` where ``kids`` are the children of ``v`` whose
        subtrees together make up exactly ``leafset``, or None if no pendant
        subtree has that leaf set.
        """
        verts = [self.leaf_vertex[x] for x in leafset]
        v = verts[0]
        for w in verts[1:]:
            v = self.lca(v, w)
        kids = [c for c in self.children[v] if self.leafsets[c] <= leafset]
        if frozenset().union(*(self.leafsets[c] for c in kids)) != leafset:
            return None
        return v, kids

    def replace_pendant(self, leafset: frozenset[str], new_label: str) -> "Tree":
        """Replace the pendant subtree with leaf set ``leafset`` by a single leaf."""
        found = self.pendant_subtree_vertices(leafset)
        if found is None:
            raise TreeError(f"no pendant subtree on {sorted(leafset)}")
        v, kids = found
        gone = set(kids)

        def walk(u: int) -> Nested:
            if not self.children[u]:
                return self.label[u]
            if u == v:
                if len(kids) == len(self.children[u]):
                    return new_label
                rest = [walk(c) for c in self.children[u] if c not in gone]
                return tuple(rest) + (new_label,)
            return tuple(walk(c) for c in self.children[u])

        return Tree.from_nested(walk(self.root))

    def contract(self, vertices: Iterable[int]) -> "Tree":
        """Contract the edges entering the given internal non-root vertices."""
        gone = set(vertices)

        def items(u: int) -> list[Nested]:
            out: list[Nested] = []
            for c in self.children[u]:
                if not self.children[c]:
                    out.append(self.label[c])
                elif c in gone:
                    out.extend(items(c))
                else:
                    out.append(tuple(items(c)))
            return out

        return Tree.from_nested(tuple(items(self.root)))


@dataclass(frozen=True)
class Instance:
    """A Hybridization Number instance: trees on a common label set and budget ``k``."""

    trees: tuple[Tree, ...]
    k: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise TreeError("an instance needs at least one tree")
        if self.k < 0:
            raise TreeError("k must be non-negative")
        first = self.trees[0].leaves
        for i, tree in enumerate(self.trees[1:], start=2):
            if tree.leaves != first:
                diff = sorted(first ^ tree.leaves)
                raise TreeError(f"tree {i} has a different label set (symmetric difference {diff})")

    def __iter__(self) -> Iterator[Tree]:
        return iter(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    @property
    def labels(self) -> frozenset[str]:
        return self.trees[0].leaves

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def t(self) -> int:
        return len(self.trees)

    @property
    def max_outdegree(self) -> int:
        return max(tree.max_outdegree for tree in self.trees)

    def with_trees(self, trees: Iterable[Tree]) -> "Instance":
        return Instance(tuple(trees), self.k)


def _trees(ts: Instance | Sequence[Tree]) -> tuple[Tree, ...]:
    return ts.trees if isinstance(ts, Instance) else tuple(ts)


# ---------------------------------------------------------------------------
# Refinement


def clusters(t: Tree) -> frozenset[frozenset[str]]:
    return t.clusters


def is_refinement(fine: Tree, coarse: Tree) -> bool:
    """True iff ``coarse`` can be obtained from ``fine`` by contracting edges."""
    if fine.leaves != coarse.leaves:
        raise TreeError("refinement test needs trees on the same label set")
    return coarse.clusters <= fine.clusters


def compatible_clusters(cs: Iterable[frozenset[str]]) -> bool:
    """True iff every two clusters are nested or disjoint."""
    cs = sorted(set(cs), key=len)
    for a, b in combinations(cs, 2):
        if a & b and not a <= b:
            return False
    return True


def tree_from_clusters(labels: Iterable[str], cs: Iterable[frozenset[str]]) -> Tree:
    """Hasse-diagram tree of a compatible cluster family on ``labels``."""
    labels = frozenset(labels)
    family = {c for c in cs if len(c) >= 2} | {labels}
    ordered = sorted(family, key=lambda c: (-len(c), sorted(c)))

    def build(c: frozenset[str], pool: list[frozenset[str]]) -> Nested:
        inside = [d for d in pool if d < c]
        maximal = [d for d in inside if not any(d < e for e in inside)]
        covered = frozenset().union(*maximal) if maximal else frozenset()
        kids: list[Nested] = [build(d, inside) for d in maximal]
        kids.extend(sorted(c - covered))
        return tuple(kids)

    if len(labels) == 1:
        return Tree.from_nested(next(iter(labels)))
    return Tree.from_nested(build(ordered[0], ordered[1:]))


# ---------------------------------------------------------------------------
# Common pendant subtrees


@dataclass(frozen=True)
class PendantSubtree:
    """A nontrivial common pendant subtree and where it sits in every tree."""

    subtree: Tree
    roots: tuple[int, ...]  # per input tree: vertex whose children carry the subtree

    @property
    def leaves(self) -> frozenset[str]:
        return self.subtree.leaves


def _common_cherry(trees: Sequence[Tree]) -> tuple[str, str] | None:
    groups: dict[tuple[int, ...], list[str]] = {}
    for x in sorted(trees[0].leaves):
        sig = tuple(t.parent_of(x) for t in trees)
        groups.setdefault(sig, []).append(x)
    best = None
    for members in groups.values():
        if len(members) >= 2 and (best is None or members[:2] < list(best)):
            best = (members[0], members[1])
    return best


def _fresh(used: Iterable[str], stem: str = "__z") -> str:
    used = set(used)
    i = 0
    while f"{stem}{i}" in used:
        i += 1
    return f"{stem}{i}"


def _common_pendant_nested(trees: tuple[Tree, ...]) -> Nested | None:
    pair = _common_cherry(trees)
    if pair is None:
        return None
    x, y = pair
    z = _fresh(trees[0].leaves)
    reduced = tuple(t.delete_leaves([y]).relabel({x: z}) for t in trees)
    if len(reduced[0].leaves) == 1:
        return (x, y)
    sub = _common_pendant_nested(reduced)
    if sub is None:
        return (x, y)

    def expand(node: Nested) -> Nested:
        if isinstance(node, str):
            return (x, y) if node == z else node
        return tuple(expand(c) for c in node)

    return expand(sub)


def find_common_pendant_subtree(ts: Instance | Sequence[Tree]) -> PendantSubtree | None:
    """Find a nontrivial maximal common pendant subtree, or None.

    Repeatedly contracts a cherry shared by all trees into a fresh leaf and
    recurses; the recursion result is re-expanded on the way back.
    """
    trees = _trees(ts)
    nested = _common_pendant_nested(trees)
    if nested is None:
        return None
    sub = Tree.from_nested(nested)
    roots = []
    for t in trees:
        found = t.pendant_subtree_vertices(sub.leaves)
        if found is None:  # pragma: no cover - guaranteed by construction
            raise TreeError("common pendant subtree not pendant in some tree")
        roots.append(found[0])
    return PendantSubtree(sub, tuple(roots))


# ---------------------------------------------------------------------------
# Chains


@dataclass(frozen=True)
class Chain:
    """A common chain ``(x_1, ..., x_p)`` of a tree set."""

    leaves: tuple[str, ...]
    q: int
    pendant_in: frozenset[int] = field(default_factory=frozenset)

    @property
    def p(self) -> int:
        return len(self.leaves)

    def __len__(self) -> int:
        return len(self.leaves)


def verify_chain(seq: Sequence[str], t: Tree) -> tuple[bool, bool]:
    """Check whether ``seq`` is a chain of ``t``.

    Returns ``(is_chain, is_pendant)``; ``is_pendant`` is False whenever
    ``is_chain`` is.
    """
    if len(seq) < 2 or len(set(seq)) != len(seq):
        return False, False
    members = set(seq)
    ps = [t.parent_of(x) for x in seq]
    path = [ps[0]]
    for a, b in zip(ps, ps[1:]):
        if a == b:
            continue
        if t.parent[b] != a:
            return False, False
        path.append(b)
    leaf_vertices = {t.vertex(x) for x in members}
    for i in range(1, len(path) - 1):
        allowed = leaf_vertices | {path[i + 1]}
        if any(c not in allowed for c in t.children[path[i]]):
            return False, False
    pendant = len(path) == 1 or all(c in leaf_vertices for c in t.children[path[-1]])
    return True, pendant


def _star_count(seq: Sequence[str], trees: Sequence[Tree]) -> int:
    return sum(1 for t in trees if len({t.parent_of(x) for x in seq}) == 1)


def _make_chain(seq: Sequence[str], trees: Sequence[Tree]) -> Chain | None:
    pendant = set()
    for i, t in enumerate(trees):
        ok, pend = verify_chain(seq, t)
        if not ok:
            return None
        if pend:
            pendant.add(i)
    return Chain(tuple(seq), _star_count(seq, trees), frozenset(pendant))


def _path_ok(t: Tree, cset: frozenset[str]) -> bool:
    """Conditions on a single tree: parents on one path, interior vertices clean."""
    parents = sorted({t.parent_of(x) for x in cset}, key=t.depth)
    top, bottom = parents[0], parents[-1]
    for p in parents:
        if not t.is_ancestor(top, p) or not t.is_ancestor(p, bottom):
            return False
    leaf_vertices = {t.vertex(x) for x in cset}
    v = t.parent[bottom] if bottom != top else -1
    nxt = bottom
    while v != -1 and v != top:
        if any(c != nxt and c not in leaf_vertices for c in t.children[v]):
            return False
        nxt = v
        v = t.parent[v]
    return True


def is_chainable(cset: Iterable[str], ts: Instance | Sequence[Tree]) -> Chain | None:
    """Return the common chain on leaf set ``cset`` if one exists.

    Raises :class:`ChainOrderError` if the order is not unique, which means
    the precondition (no common pendant subtrees) was violated.
    """
    trees = _trees(ts)
    cset = frozenset(cset)
    if len(cset) < 2:
        return None
    if not all(_path_ok(t, cset) for t in trees):
        return None
    # x -> y iff some tree has p(x) strictly above p(y)
    above = {x: set() for x in cset}
    for t in trees:
        depth = {x: t.depth(t.parent_of(x)) for x in cset}
        for x in cset:
            for y in cset:
                if depth[x] < depth[y]:
                    above[x].add(y)
    indeg = {x: 0 for x in cset}
    for x in cset:
        for y in above[x]:
            indeg[y] += 1
    order = []
    ready = sorted(x for x in cset if indeg[x] == 0)
    while ready:
        if len(ready) > 1:
            raise ChainOrderError(f"ambiguous chain order among {ready}")
        x = ready.pop()
        order.append(x)
        for y in above[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                ready.append(y)
        ready.sort()
    if len(order) != len(cset):
        return None
    return _make_chain(order, trees)


def _st_chain(s: str, t_: str, trees: Sequence[Tree], labels: Sequence[str]) -> Chain | None:
    """Maximum common chain starting at ``s`` and ending at ``t_`` (or None)."""
    ps = [tr.parent_of(s) for tr in trees]
    pt = [tr.parent_of(t_) for tr in trees]
    for tr, a, b in zip(trees, ps, pt):
        if not tr.is_ancestor(a, b):
            return None
    mandatory = {s, t_}
    for tr, a, b in zip(trees, ps, pt):
        v = tr.parent[b] if a != b else -1
        while v != -1 and v != a:
            for c in tr.children[v]:
                if not tr.children[c]:
                    mandatory.add(tr.label[c])
            v = tr.parent[v]
    cset = frozenset(mandatory)
    base = is_chainable(cset, trees)
    if base is None:
        return None
    extra = []
    for x in labels:
        if x in cset:
            continue
        if all(tr.parent_of(x) in (a, b) for tr, a, b in zip(trees, ps, pt)):
            if is_chainable(cset | {x}, trees) is not None:
                extra.append(x)
    if extra:
        # longest path in the DAG of "p_T(x) weakly above p_T(y) in all trees"
        succ = {x: [y for y in extra if y != x and all(
            tr.is_ancestor(tr.parent_of(x), tr.parent_of(y)) for tr in trees)] for x in extra}
        best: dict[str, tuple[str, ...]] = {}

        def longest(x: str) -> tuple[str, ...]:
            if x not in best:
                tails = [longest(y) for y in succ[x]]
                tail = min(tails, key=lambda p: (-len(p), p)) if tails else ()
                best[x] = (x,) + tail
            return best[x]

        path = min((longest(x) for x in extra), key=lambda p: (-len(p), p))
        chain = is_chainable(cset | set(path), trees)
        if chain is not None:
            return chain
    return base


def common_chains(ts: Instance | Sequence[Tree]) -> dict[tuple[str, str], Chain]:
    """Maximum s-t chain for every ordered leaf pair that admits one."""
    trees = _trees(ts)
    labels = sorted(trees[0].leaves)
    out = {}
    for s in labels:
        for t_ in labels:
            if s == t_:
                continue
            chain = _st_chain(s, t_, trees, labels)
            if chain is not None:
                out[(s, t_)] = chain
    return out


def _pick(chains: Iterable[Chain]) -> Chain | None:
    return min(chains, key=lambda c: (-c.p, c.leaves), default=None)


def max_q_star_chain(ts: Instance | Sequence[Tree], q: int,
                     chains: dict[tuple[str, str], Chain] | None = None) -> Chain | None:
    """Maximum-length common q-star chain (ties: smallest label sequence)."""
    trees = _trees(ts)
    if q >= len(trees):
        return None
    if chains is None:
        chains = common_chains(trees)
    return _pick(c for c in chains.values() if c.q == q)


def max_common_chain(ts: Instance | Sequence[Tree],
                     chains: dict[tuple[str, str], Chain] | None = None) -> Chain | None:
    """Maximum-length common chain regardless of star count."""
    if chains is None:
        chains = common_chains(ts)
    return _pick(chains.values())
