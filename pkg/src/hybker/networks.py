"""Rooted phylogenetic networks: cleanup, binarization, generators and display.

:class:`Network` is a small directed multigraph with labelled leaves.  All
public functions treat networks as values and return new objects; the
mutating helpers (``add_edge``, ``remove_vertex`` ...) are meant for
building networks step by step before handing them out.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import networkx as nx

from .trees import Tree, TreeError, is_refinement


class NetworkError(ValueError):
    """Raised when a graph is not a valid phylogenetic network."""


class Network:
    """Directed acyclic multigraph with labelled leaves.

    Parallel edges are represented by repeated entries in ``succ``/``pred``.
    """

    def __init__(self) -> None:
        self.succ: dict[int, list[int]] = {}
        self.pred: dict[int, list[int]] = {}
        self.label: dict[int, str] = {}
        self._next = 0

    # -- building ---------------------------------------------------------------

    def add_vertex(self, label: str | None = None) -> int:
        v = self._next
        self._next += 1
        self.succ[v] = []
        self.pred[v] = []
        if label is not None:
            self.label[v] = label
        return v

    def add_edge(self, u: int, v: int) -> None:
        self.succ[u].append(v)
        self.pred[v].append(u)

    def remove_edge(self, u: int, v: int) -> None:
        self.succ[u].remove(v)
        self.pred[v].remove(u)

    def remove_vertex(self, v: int) -> None:
        for w in self.succ.pop(v):
            self.pred[w].remove(v)
        for u in self.pred.pop(v):
            self.succ[u].remove(v)
        self.label.pop(v, None)

    def subdivide(self, u: int, v: int, label: str | None = None) -> int:
        """Replace one copy of edge ``(u, v)`` by a path through a new vertex."""
        w = self.add_vertex(label)
        i = self.succ[u].index(v)
        self.succ[u][i] = w
        j = self.pred[v].index(u)
        self.pred[v][j] = w
        self.pred[w].append(u)
        self.succ[w].append(v)
        return w

    def copy(self) -> "Network":
        other = Network()
        other.succ = {v: list(ws) for v, ws in self.succ.items()}
        other.pred = {v: list(us) for v, us in self.pred.items()}
        other.label = dict(self.label)
        other._next = self._next
        return other

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], labels: dict[int, str]) -> "Network":
        net = cls()
        edges = list(edges)
        verts = sorted({v for e in edges for v in e} | set(labels))
        remap = {}
        for v in verts:
            remap[v] = net.add_vertex(labels.get(v))
        for u, v in edges:
            net.add_edge(remap[u], remap[v])
        return net

    @classmethod
    def from_tree(cls, tree: Tree) -> "Network":
        net = cls()
        ids = [net.add_vertex(tree.label[v]) for v in range(len(tree))]
        for v in range(len(tree)):
            for c in tree.children[v]:
                net.add_edge(ids[v], ids[c])
        return net

    # -- queries ------------------------------------------------------------------

    @property
    def vertices(self) -> list[int]:
        return list(self.succ)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, ws in self.succ.items() for v in ws]

    def indegree(self, v: int) -> int:
        return len(self.pred[v])

    def outdegree(self, v: int) -> int:
        return len(self.succ[v])

    @property
    def roots(self) -> list[int]:
        return [v for v in self.succ if not self.pred[v]]

    @property
    def root(self) -> int:
        roots = self.roots
        if len(roots) != 1:
            raise NetworkError(f"expected a single root, found {len(roots)}")
        return roots[0]

    @property
    def leaves(self) -> frozenset[str]:
        return frozenset(self.label.values())

    def leaf_vertex(self, label: str) -> int:
        for v, lab in self.label.items():
            if lab == label:
                return v
        raise KeyError(label)

    def leaf_map(self) -> dict[str, int]:
        return {lab: v for v, lab in self.label.items()}

    @property
    def reticulations(self) -> list[int]:
        return [v for v in self.succ if len(self.pred[v]) >= 2]

    def topological_order(self) -> list[int]:
        indeg = {v: len(us) for v, us in self.pred.items()}
        ready = sorted(v for v, d in indeg.items() if d == 0)
        order = []
        while ready:
            v = ready.pop()
            order.append(v)
            for w in self.succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        if len(order) != len(self.succ):
            raise NetworkError("graph contains a directed cycle")
        return order

    def is_acyclic(self) -> bool:
        try:
            self.topological_order()
        except NetworkError:
            return False
        return True

    def is_binary(self) -> bool:
        for v in self.succ:
            din, dout = len(self.pred[v]), len(self.succ[v])
            if din > 2 or dout > 2 or (din == 2 and dout > 1):
                return False
        return True

    def has_parallel_edges(self) -> bool:
        return any(len(set(ws)) != len(ws) for ws in self.succ.values())

    def validate(self) -> None:
        """Raise :class:`NetworkError` unless this is a valid phylogenetic network."""
        order = self.topological_order()
        if len(self.roots) != 1:
            raise NetworkError(f"expected a single root, found {len(self.roots)}")
        for v in order:
            din, dout = len(self.pred[v]), len(self.succ[v])
            if v in self.label:
                if dout:
                    raise NetworkError(f"labelled vertex {self.label[v]!r} has children")
            elif dout == 0:
                raise NetworkError("unlabelled leaf")
            if din == 1 and dout == 1:
                raise NetworkError("vertex with indegree 1 and outdegree 1")
        if len(self.label) != len(set(self.label.values())):
            raise NetworkError("duplicate leaf label")

    def descendants_leaves(self) -> dict[int, frozenset[str]]:
        out: dict[int, frozenset[str]] = {}
        for v in reversed(self.topological_order()):
            if v in self.label:
                out[v] = frozenset((self.label[v],))
            else:
                out[v] = frozenset().union(*(out[w] for w in self.succ[v])) if self.succ[v] else frozenset()
        return out

    def to_nx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        for v in self.succ:
            g.add_node(v, label=self.label.get(v))
        for u, v in self.edges():
            g.add_edge(u, v)
        return g

    def to_tree(self) -> Tree:
        """Convert a reticulation-free network to a :class:`Tree`."""
        if self.reticulations:
            raise NetworkError("network has reticulations")

        def walk(v: int):
            if v in self.label:
                return self.label[v]
            return tuple(walk(w) for w in self.succ[v])

        return Tree.from_nested(walk(self.root))

    def __repr__(self) -> str:
        from .newick import serialize_network
        return f"Network({serialize_network(self)!r})"


def isomorphic(a: Network, b: Network) -> bool:
    """Leaf-label preserving isomorphism of two networks."""
    if a.leaves != b.leaves or len(a.succ) != len(b.succ):
        return False
    return nx.is_isomorphic(a.to_nx(), b.to_nx(),
                            node_match=lambda x, y: x["label"] == y["label"])


# ---------------------------------------------------------------------------
# Reticulation number and cleanup


def reticulation_number(n: Network) -> int:
    by_counts = len(n.edges()) - len(n.succ) + 1
    by_indegree = sum(len(us) - 1 for us in n.pred.values() if len(us) >= 2)
    if by_counts != by_indegree:
        raise NetworkError(f"|E|-|V|+1 = {by_counts} but indegree sum = {by_indegree}")
    return by_counts


def _cleanup_step(g: Network, v: int) -> bool:
    """Apply one cleanup rule at ``v`` if any applies."""
    if v not in g.succ:
        return False
    din, dout = len(g.pred[v]), len(g.succ[v])
    labelled = v in g.label
    if not labelled and dout == 0:
        g.remove_vertex(v)
        return True
    if not labelled and din == 0 and dout == 1:
        g.remove_vertex(v)
        return True
    if not labelled and din == 1 and dout == 1:
        u, w = g.pred[v][0], g.succ[v][0]
        g.remove_vertex(v)
        g.add_edge(u, w)
        return True
    counts = Counter(g.succ[v])
    for w, c in counts.items():
        if c > 1:
            for _ in range(c - 1):
                g.remove_edge(v, w)
            return True
    return False


def cleanup(g: Network, rng: random.Random | None = None) -> Network:
    """Clean up a directed graph into a network.

    Repeatedly deletes unlabelled outdegree-0 vertices and indegree-0
    outdegree-1 vertices, suppresses indegree-1 outdegree-1 vertices and
    merges parallel edges.  ``rng`` randomizes the order in which the rules
    are tried (the result does not depend on it).
    """
    g = g.copy()
    changed = True
    while changed:
        changed = False
        verts = list(g.succ)
        if rng is not None:
            rng.shuffle(verts)
        for v in verts:
            if _cleanup_step(g, v):
                changed = True
    if len(g.roots) != 1:
        raise NetworkError(f"cleanup left {len(g.roots)} roots")
    for v, lab in g.label.items():
        if g.succ[v]:
            raise NetworkError(f"labelled vertex {lab!r} has children")
    return g


# ---------------------------------------------------------------------------
# Binarization


def _min_leaf(n: Network) -> dict[int, str]:
    below = n.descendants_leaves()
    return {v: min(ls) if ls else "" for v, ls in below.items()}


def binarize(n: Network) -> Network:
    """Binary network with the same reticulation number from which ``n``
    arises by contracting edges.

    Vertices of outdegree ``d > 2`` become caterpillars (children ordered by
    smallest descendant label, the first two joined deepest); vertices of
    indegree ``d > 2`` become chains of ``d - 1`` indegree-2 vertices.
    """
    g = n.copy()
    key = _min_leaf(g)
    for v in list(g.succ):
        if len(g.pred[v]) >= 2 and len(g.succ[v]) >= 2:
            # split into a reticulation part and a tree part
            r = g.add_vertex()
            for u in list(g.pred[v]):
                g.remove_edge(u, v)
                g.add_edge(u, r)
            g.add_edge(r, v)
            key[r] = key[v]
    for v in list(g.succ):
        kids = g.succ[v]
        if len(kids) > 2:
            ordered = sorted(kids, key=lambda w: (key[w], w))
            for w in ordered:
                g.remove_edge(v, w)
            cur = ordered[0]
            for w in ordered[1:-1]:
                m = g.add_vertex()
                g.add_edge(m, cur)
                g.add_edge(m, w)
                key[m] = min(key[cur], key[w])
                cur = m
            g.add_edge(v, cur)
            g.add_edge(v, ordered[-1])
        parents = g.pred[v]
        if len(parents) > 2:
            ordered = sorted(parents, key=lambda u: (key[u], u))
            for u in ordered:
                g.remove_edge(u, v)
            cur = ordered[0]
            for u in ordered[1:-1]:
                m = g.add_vertex()
                g.add_edge(cur, m)
                g.add_edge(u, m)
                cur = m
            g.add_edge(cur, v)
            g.add_edge(ordered[-1], v)
    return g


# ---------------------------------------------------------------------------
# Pendant subtrees, generators and sides


def has_nontrivial_pendant_subtree(n: Network) -> bool:
    """True iff some vertex has at least two leaf children."""
    return any(sum(1 for w in ws if w in n.label) >= 2 for ws in n.succ.values())


@dataclass(frozen=True, order=True)
class Side:
    """An edge side (``kind == "e"``, index into the edge list) or a vertex side."""

    kind: str
    index: int


@dataclass
class Generator:
    """Binary k-reticulation generator.

    ``edges`` is the edge multiset; each entry is an edge side.  Vertex 0 is
    the root (indegree 0, outdegree 1).
    """

    n_vertices: int
    edges: list[tuple[int, int]]
    k: int

    def __post_init__(self) -> None:
        self.edges = [tuple(e) for e in self.edges]
        self._succ: dict[int, list[int]] = defaultdict(list)
        self._pred: dict[int, list[int]] = defaultdict(list)
        for i, (u, v) in enumerate(self.edges):
            self._succ[u].append(i)
            self._pred[v].append(i)

    @property
    def root(self) -> int:
        return 0

    def out_edges(self, v: int) -> list[int]:
        return self._succ[v]

    def in_edges(self, v: int) -> list[int]:
        return self._pred[v]

    @property
    def vertex_sides(self) -> list[int]:
        return [v for v in range(self.n_vertices)
                if len(self._pred[v]) == 2 and not self._succ[v]]

    @property
    def edge_sides(self) -> list[tuple[int, int]]:
        return list(self.edges)

    @property
    def sides(self) -> list[Side]:
        return ([Side("v", v) for v in self.vertex_sides]
                + [Side("e", i) for i in range(len(self.edges))])

    @property
    def reticulations(self) -> list[int]:
        return [v for v in range(self.n_vertices) if len(self._pred[v]) == 2]

    def validate(self) -> None:
        if self._pred[0] or len(self._succ[0]) != 1:
            raise NetworkError("generator root must have indegree 0 and outdegree 1")
        rets = 0
        for v in range(1, self.n_vertices):
            din, dout = len(self._pred[v]), len(self._succ[v])
            if din == 2 and dout <= 1:
                rets += 1
            elif not (din == 1 and dout == 2):
                raise NetworkError(f"generator vertex {v} has degrees ({din}, {dout})")
        if rets != self.k:
            raise NetworkError(f"generator has {rets} reticulations, expected {self.k}")
        g = nx.MultiDiGraph(self.edges)
        if not nx.is_directed_acyclic_graph(g):
            raise NetworkError("generator has a cycle")

    def reachability(self) -> list[set[int]]:
        """Vertices reachable from each vertex (including itself)."""
        g = nx.MultiDiGraph()
        g.add_nodes_from(range(self.n_vertices))
        g.add_edges_from(self.edges)
        return [nx.descendants(g, v) | {v} for v in range(self.n_vertices)]

    def side_head(self, side: Side) -> int:
        return self.edges[side.index][1] if side.kind == "e" else side.index

    def side_tail(self, side: Side) -> int:
        return self.edges[side.index][0] if side.kind == "e" else side.index

    def below(self, s2: Side, s1: Side, reach: list[set[int]] | None = None) -> bool:
        """True iff side ``s2`` is below side ``s1`` (path from head of s1 to tail of s2)."""
        reach = reach or self.reachability()
        return self.side_tail(s2) in reach[self.side_head(s1)]

    def to_nx(self) -> nx.DiGraph:
        """Simple digraph with edge multiplicities as the ``mult`` attribute."""
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n_vertices))
        for (u, v), c in Counter(self.edges).items():
            g.add_edge(u, v, mult=c)
        g.nodes[0]["root"] = True
        return g


SideAssignment = dict  # Side -> tuple of leaf labels, top to bottom


def underlying_generator(n: Network) -> tuple[Generator, dict[Side, tuple[str, ...]]]:
    """Generator underlying a binary network plus the side of every leaf."""
    if not n.is_binary():
        raise NetworkError("underlying generator needs a binary network")
    if has_nontrivial_pendant_subtree(n):
        raise NetworkError("network has a nontrivial pendant subtree")
    k = reticulation_number(n)
    if k == 0:
        raise NetworkError("network has no reticulations")
    root = n.root
    # generator vertices: reticulations and tree vertices without leaf
    # children; tree vertices with one leaf child become subdivisions
    def kept(v: int) -> bool:
        if v in n.label:
            return False
        if len(n.pred[v]) == 2:
            return True
        return not any(w in n.label for w in n.succ[v])

    order = n.topological_order()
    ids: dict[int, int] = {}
    nxt = 1
    for v in order:
        if kept(v):
            ids[v] = nxt
            nxt += 1
    edges: list[tuple[int, int]] = []
    assignment: dict[Side, tuple[str, ...]] = {}

    def follow(start_tail: int, first: int) -> None:
        """Walk a chain of subdivision vertices starting at ``first``."""
        leaves = []
        v = first
        while not kept(v):
            leaf = next(w for w in n.succ[v] if w in n.label)
            other = next(w for w in n.succ[v] if w not in n.label)
            leaves.append(n.label[leaf])
            v = other
        edges.append((start_tail, ids[v]))
        assignment[Side("e", len(edges) - 1)] = tuple(leaves)

    follow(0, root)
    for v in order:
        if v not in ids:
            continue
        for w in n.succ[v]:
            if w in n.label:
                continue
            follow(ids[v], w)
    gen = Generator(nxt, edges, k)
    for v in order:
        if v in ids and len(n.pred[v]) == 2 and n.succ[v] and n.succ[v][0] in n.label:
            assignment[Side("v", ids[v])] = (n.label[n.succ[v][0]],)
    gen.validate()
    return gen, assignment


def reconstruct(g: Generator, assignment: dict[Side, Sequence[str]]) -> Network:
    """Network obtained by hanging leaves on the sides of a generator.

    The result is cleaned up, so empty parallel edges collapse.
    """
    net = Network()
    vid = [net.add_vertex() for _ in range(g.n_vertices)]
    for i, (u, v) in enumerate(g.edges):
        cur = vid[u]
        for x in assignment.get(Side("e", i), ()):
            s = net.add_vertex()
            net.add_edge(cur, s)
            net.add_edge(s, net.add_vertex(x))
            cur = s
        net.add_edge(cur, vid[v])
    for v in g.vertex_sides:
        leaves = assignment.get(Side("v", v), ())
        if len(leaves) != 1:
            raise NetworkError(f"vertex side {v} needs exactly one leaf, got {len(leaves)}")
        net.add_edge(vid[v], net.add_vertex(leaves[0]))
    return cleanup(net)


# ---------------------------------------------------------------------------
# Display


def switchings(n: Network) -> Iterator[Network]:
    """Subgraphs keeping exactly one incoming edge per reticulation."""
    rets = sorted(n.reticulations)
    choices = [sorted(set(n.pred[r])) for r in rets]
    for pick in itertools.product(*choices):
        g = n.copy()
        for r, keep in zip(rets, pick):
            for u in list(g.pred[r]):
                if u != keep:
                    g.remove_edge(u, r)
                else:
                    while g.pred[r].count(keep) > 1:
                        g.remove_edge(keep, r)
        yield g


def displayed_trees(n: Network) -> list[Tree]:
    """Distinct trees displayed by ``n`` via switchings, deduplicated by cluster set."""
    seen: dict[frozenset, Tree] = {}
    leaves = n.leaves
    for g in switchings(n):
        try:
            tree = cleanup(g).to_tree()
        except (NetworkError, TreeError):
            continue
        if tree.leaves != leaves:
            continue
        seen.setdefault(tree.clusters, tree)
    return sorted(seen.values(), key=lambda t: sorted(map(sorted, t.clusters)))


def displays(n: Network, t: Tree) -> bool:
    """True iff the tree ``t`` is displayed by the network ``n``."""
    if n.leaves != t.leaves:
        raise NetworkError("network and tree are on different label sets")
    if not n.is_binary():
        n = binarize(n)
    return any(is_refinement(d, t) for d in displayed_trees(n))


def displays_all(n: Network, trees: Iterable[Tree]) -> bool:
    shown = displayed_trees(n if n.is_binary() else binarize(n))
    for t in trees:
        if n.leaves != t.leaves:
            raise NetworkError("network and tree are on different label sets")
        if not any(t.clusters <= d.clusters for d in shown):
            return False
    return True
