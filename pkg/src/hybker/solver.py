"""Exact solving by generators, partial networks and arrow-relation extension.

For each reticulation budget ``k'`` the solver enumerates the binary
``k'``-reticulation generators, places at most two leaves (top and bottom)
on every side, and extends each placement by inserting the remaining leaves
on the sides whose top and bottom are known.  Because every leaf between a
side's top and bottom is determined by the arrow relations of the input
trees, the extension is deterministic.

Placements are built side by side and pruned as soon as the partial network
fails to display the input trees restricted to the leaves placed so far;
this is sound because restricting a network and its trees to a leaf subset
preserves display.
"""

from __future__ import annotations

import itertools
import os
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import networkx as nx

from .networks import (Generator, Network, Side, displays_all, reconstruct,
                       reticulation_number)
from .trees import Instance, Tree, compatible_clusters, tree_from_clusters

GENERATOR_CEILING = 3


class CapacityError(ValueError):
    """A request beyond the documented size limits."""


# ---------------------------------------------------------------------------
# Arrow relations


class ArrowIndex:
    """Constant-time arrow queries for a tree set.

    ``arrow(x, y)``: some tree has a vertex above ``y`` but not above ``x``.
    ``arrow2(x, y, z)``: some tree has a vertex above ``y`` and ``z`` but
    not above ``x``.  The lowest candidate vertex is always the best
    witness, so it suffices to intersect, over all trees, the cluster of
    ``p_T(y)`` (respectively ``lca_T(y, z)``) and test membership of ``x``.
    """

    def __init__(self, trees: Sequence[Tree]):
        self.labels = sorted(trees[0].leaves)
        self.bit = {x: 1 << i for i, x in enumerate(self.labels)}
        full = (1 << len(self.labels)) - 1
        n = len(self.labels)
        self._par = [full] * n
        self._lca = [[full] * n for _ in range(n)]
        for t in trees:
            masks = [sum(self.bit[x] for x in ls) for ls in t.leafsets]
            vs = [t.vertex(x) for x in self.labels]
            for i, v in enumerate(vs):
                self._par[i] &= masks[t.parent[v]]
            for i in range(n):
                row = self._lca[i]
                for j in range(i + 1, n):
                    m = masks[t.lca(vs[i], vs[j])]
                    row[j] &= m
        for i in range(n):
            for j in range(i + 1, n):
                self._lca[j][i] = self._lca[i][j]
        self._idx = {x: i for i, x in enumerate(self.labels)}

    def arrow(self, x: str, y: str) -> bool:
        return not self._par[self._idx[y]] & self.bit[x]

    def arrow2(self, x: str, y: str, z: str) -> bool:
        i, j = self._idx[y], self._idx[z]
        if i == j:
            return self.arrow(x, y)
        return not self._lca[i][j] & self.bit[x]

    def common_mask(self, y: str, z: str) -> int:
        """Leaves below ``lca_T(y, z)`` in every tree."""
        i, j = self._idx[y], self._idx[z]
        return self._par[i] if i == j else self._lca[i][j]


def build_arrow_index(ts: Instance | Sequence[Tree]) -> ArrowIndex:
    trees = ts.trees if isinstance(ts, Instance) else tuple(ts)
    return ArrowIndex(trees)


# ---------------------------------------------------------------------------
# Generators


_TREE, _RET1, _RET0 = "t", "r1", "r0"
_IN = {_TREE: 1, _RET1: 2, _RET0: 2}
_OUT = {_TREE: 2, _RET1: 1, _RET0: 0}


def _labelled_generators(k: int) -> Iterator[tuple[list[str], list[tuple[int, int]]]]:
    """All generators on vertices numbered in a topological order."""
    for b in range(k + 1):
        a = 2 * k - 1 - b
        if a < 0:
            continue
        counts0 = {_TREE: a, _RET1: b, _RET0: k - b}
        n_vertices = 1 + a + k
        types = ["root"]
        cap = [1]
        edges: list[tuple[int, int]] = []

        def rec(counts: dict[str, int]):
            i = len(types)
            if i == n_vertices:
                if not any(cap):
                    yield list(types), list(edges)
                return
            avail = [u for u in range(i) if cap[u] > 0]
            if not avail:
                return
            remaining_in = sum(_IN[t] * c for t, c in counts.items())
            if sum(cap) > remaining_in:
                return
            for typ in (_TREE, _RET1, _RET0):
                if counts[typ] == 0:
                    continue
                counts[typ] -= 1
                for src in itertools.combinations_with_replacement(avail, _IN[typ]):
                    if any(cap[u] < src.count(u) for u in set(src)):
                        continue
                    for u in src:
                        cap[u] -= 1
                        edges.append((u, i))
                    types.append(typ)
                    cap.append(_OUT[typ])
                    yield from rec(counts)
                    cap.pop()
                    types.pop()
                    for u in src:
                        edges.pop()
                        cap[u] += 1
                counts[typ] += 1

        yield from rec(dict(counts0))


def _as_nx(types: list[str], edges: list[tuple[int, int]]) -> nx.DiGraph:
    g = nx.DiGraph()
    for v, typ in enumerate(types):
        g.add_node(v, kind=typ)
    for (u, v), c in Counter(edges).items():
        g.add_edge(u, v, mult=c)
    return g


@lru_cache(maxsize=None)
def _generators(k: int) -> tuple[Generator, ...]:
    buckets: dict[str, list[nx.DiGraph]] = defaultdict(list)
    out: list[Generator] = []
    match_node = nx.algorithms.isomorphism.categorical_node_match("kind", None)
    match_edge = nx.algorithms.isomorphism.categorical_edge_match("mult", 1)
    for types, edges in _labelled_generators(k):
        g = _as_nx(types, edges)
        key = nx.weisfeiler_lehman_graph_hash(g, node_attr="kind", edge_attr="mult", iterations=4)
        if any(nx.is_isomorphic(g, h, node_match=match_node, edge_match=match_edge) for h in buckets[key]):
            continue
        for v in g.nodes:
            g.nodes[v]["kind"] = types[v]
        buckets[key].append(g)
        gen = Generator(len(types), sorted(edges), k)
        gen.validate()
        out.append(gen)
    return tuple(out)


def enumerate_generators(k: int) -> list[Generator]:
    """All binary k-reticulation generators up to isomorphism."""
    if k < 1:
        raise ValueError("generators need k >= 1")
    if k > GENERATOR_CEILING:
        raise CapacityError(f"generator enumeration is limited to k <= {GENERATOR_CEILING} (got {k})")
    return list(_generators(k))


# ---------------------------------------------------------------------------
# Partial networks


@dataclass
class PartialNetwork:
    generator: Generator
    placement: dict[Side, tuple[str, ...]]

    @property
    def placed(self) -> set[str]:
        return {x for xs in self.placement.values() for x in xs}

    @property
    def finished(self) -> dict[Side, bool]:
        """Sides holding at most one leaf are finished; two-leaf sides are not."""
        return {s: len(self.placement.get(s, ())) <= 1 for s in self.generator.sides}

    def realize(self) -> Network:
        return reconstruct(self.generator, self.placement)


def _edge_options(labels: Sequence[str], used: frozenset[str] = frozenset()) -> Iterator[tuple[str, ...]]:
    free = [x for x in labels if x not in used]
    yield ()
    for x in free:
        yield (x,)
    for x, y in itertools.permutations(free, 2):
        yield (x, y)


def enumerate_partial_networks(g: Generator, labels: Sequence[str]) -> Iterator[PartialNetwork]:
    """Every placement of distinct leaves: one per vertex side, at most two
    (top, bottom) per edge side."""
    labels = list(labels)
    vsides = [Side("v", v) for v in g.vertex_sides]
    esides = [Side("e", i) for i in range(len(g.edges))]
    if len(labels) < len(vsides):
        return
    for vpick in itertools.permutations(labels, len(vsides)):
        base = {s: (x,) for s, x in zip(vsides, vpick)}

        def rec(i: int, used: frozenset[str], acc: dict):
            if i == len(esides):
                yield PartialNetwork(g, dict(acc))
                return
            for opt in _edge_options(labels, used):
                acc[esides[i]] = opt
                yield from rec(i + 1, used | set(opt), acc)
            del acc[esides[i]]

        yield from rec(0, frozenset(vpick), base)


def partial_network_bound(g: Generator, n: int) -> int:
    return n ** len(g.vertex_sides) * (n + 1) ** (2 * len(g.edges))


def extend_partial_network(np_: PartialNetwork, idx: ArrowIndex, ts: Instance | Sequence[Tree]) -> Network | None:
    """Insert all unplaced leaves between the top and bottom of two-leaf sides."""
    full = _extend_assignment(np_, idx, sorted((ts.trees if isinstance(ts, Instance) else ts)[0].leaves))
    if full is None:
        return None
    net = reconstruct(np_.generator, full)
    trees = ts.trees if isinstance(ts, Instance) else tuple(ts)
    return net if displays_all(net, trees) else None


def _extend_assignment(np_: PartialNetwork, idx: ArrowIndex,
                       labels: Sequence[str]) -> dict[Side, tuple[str, ...]] | None:
    g = np_.generator
    topo = {v: i for i, v in enumerate(_topo_order(g))}
    placed = set(np_.placed)
    full = dict(np_.placement)
    unfinished = [s for s, done in np_.finished.items() if not done]
    # a side only has unfinished sides below it that start further down
    unfinished.sort(key=lambda s: (-topo[g.side_tail(s)], s.index))
    for s in unfinished:
        top, bottom = np_.placement[s]
        xs = [x for x in labels if x not in placed and idx.arrow2(top, x, bottom)]
        order = _arrow_order(xs, idx)
        if order is None:
            return None
        full[s] = (top, *order, bottom)
        placed.update(xs)
    if len(placed) != len(labels):
        return None
    return full


def _arrow_order(xs: list[str], idx: ArrowIndex) -> list[str] | None:
    """Topological order of ``xs`` under the arrow relation, ties by label."""
    succ = {x: [y for y in xs if y != x and idx.arrow(x, y)] for x in xs}
    indeg = Counter(y for x in xs for y in succ[x])
    ready = sorted(x for x in xs if indeg[x] == 0)
    order = []
    while ready:
        x = ready.pop(0)
        order.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                ready.append(y)
        ready.sort()
    return order if len(order) == len(xs) else None


@lru_cache(maxsize=None)
def _topo_cache(n_vertices: int, edges: tuple) -> tuple[int, ...]:
    g = nx.MultiDiGraph()
    g.add_nodes_from(range(n_vertices))
    g.add_edges_from(edges)
    return tuple(nx.lexicographical_topological_sort(g))


def _topo_order(g: Generator) -> tuple[int, ...]:
    return _topo_cache(g.n_vertices, tuple(g.edges))


# ---------------------------------------------------------------------------
# Fast display check on a placement


class _Layout:
    """Per-generator tables for evaluating placements with bitmasks."""

    def __init__(self, g: Generator):
        self.g = g
        self.order = _topo_order(g)
        self.rev = list(reversed(self.order))
        rets = g.reticulations
        self.switchings: list[frozenset[int]] = []
        for pick in itertools.product(*(range(2) for _ in rets)):
            dropped = set()
            for r, p in zip(rets, pick):
                ins = g.in_edges(r)
                dropped.add(ins[1 - p])
            self.switchings.append(frozenset(dropped))
        self.vsides = {v for v in g.vertex_sides}
        # parallel edge pairs: consecutive indices with identical endpoints
        self.parallel: list[tuple[int, int]] = []
        seen: dict[tuple[int, int], int] = {}
        for i, e in enumerate(g.edges):
            if e in seen:
                self.parallel.append((seen[e], i))
            else:
                seen[e] = i

    def cluster_sets(self, vleaf: dict[int, int], eleaves: list[tuple[int, ...]]) -> list[set[int]]:
        """Nonempty reach masks of all vertices, one set per switching."""
        g = self.g
        out = []
        for dropped in self.switchings:
            mask = {}
            found: set[int] = set()
            for v in self.rev:
                if v in self.vsides:
                    m = vleaf.get(v, 0)
                else:
                    m = 0
                    for e in g.out_edges(v):
                        below = 0 if e in dropped else mask[g.edges[e][1]]
                        for b in reversed(eleaves[e]):
                            below |= b
                            found.add(below)
                        m |= below
                mask[v] = m
                found.add(m)
            found.discard(0)
            out.append(found)
        return out


@dataclass
class SearchStats:
    nodes: int = 0
    extensions: int = 0
    checks: int = 0


class _Search:
    def __init__(self, g: Generator, labels: Sequence[str], trees: Sequence[Tree], idx: ArrowIndex):
        self.g = g
        self.labels = list(labels)
        self.bit = idx.bit
        self.trees = trees
        self.idx = idx
        self.layout = _Layout(g)
        self.tree_masks = [[sum(self.bit[x] for x in c) for c in t.clusters] for t in trees]
        self.full = (1 << len(self.labels)) - 1
        self.stats = SearchStats()
        topo = {v: i for i, v in enumerate(self.layout.order)}
        self.esides = sorted(range(len(g.edges)), key=lambda i: (topo[g.edges[i][0]], topo[g.edges[i][1]], i))
        self.vsides = list(g.vertex_sides)
        self.partner = {}
        for a, b in self.layout.parallel:
            self.partner[b] = a

    def displays_restricted(self, placed: int, vleaf: dict[int, int], eleaves: list[tuple[int, ...]]) -> bool:
        self.stats.checks += 1
        sets = self.layout.cluster_sets(vleaf, eleaves)
        for masks in self.tree_masks:
            need = set()
            for c in masks:
                r = c & placed
                if r & (r - 1):
                    need.add(r)
            if not any(need <= s for s in sets):
                return False
        return True

    def run(self) -> tuple[dict[Side, tuple[str, ...]], Network] | None:
        g = self.g
        n_e = len(g.edges)
        eleaves: list[tuple[int, ...]] = [()] * n_e
        elabels: list[tuple[str, ...]] = [()] * n_e
        vleaf: dict[int, int] = {}
        vlabel: dict[int, str] = {}
        labels = self.labels
        bit = self.bit

        def finish(placed: int):
            unplaced = [x for x in labels if not placed & bit[x]]
            pairs = [elabels[e] for e in range(n_e) if len(elabels[e]) == 2]
            for x in unplaced:
                if not any(self.idx.arrow2(p[0], x, p[1]) for p in pairs):
                    return None
            placement = {Side("v", v): (x,) for v, x in vlabel.items()}
            for e in range(n_e):
                placement[Side("e", e)] = elabels[e]
            np_ = PartialNetwork(g, placement)
            self.stats.extensions += 1
            full = _extend_assignment(np_, self.idx, labels)
            if full is None:
                return None
            fe = [tuple(bit[x] for x in full[Side("e", e)]) for e in range(n_e)]
            if not self.displays_restricted(self.full, vleaf, fe):
                return None
            net = reconstruct(g, full)
            if reticulation_number(net) != g.k or not displays_all(net, self.trees):
                return None
            return full, net

        def edge_rec(j: int, placed: int):
            if j == len(self.esides):
                return finish(placed)
            e = self.esides[j]
            self.stats.nodes += 1
            free = [x for x in labels if not placed & bit[x]]
            partner = self.partner.get(e)
            options: list[tuple[str, ...]] = [()]
            options += [(x,) for x in free]
            options += list(itertools.permutations(free, 2))
            for opt in options:
                if partner is not None:
                    other = elabels[partner]
                    if not opt and not other:
                        continue  # an empty parallel pair would be a double edge
                    if opt < other if other else False:
                        continue  # the two parallel copies are interchangeable
                eleaves[e] = tuple(bit[x] for x in opt)
                elabels[e] = opt
                new = placed
                for x in opt:
                    new |= bit[x]
                if opt and not self.displays_restricted(new, vleaf, eleaves):
                    continue
                found = edge_rec(j + 1, new)
                if found is not None:
                    return found
            eleaves[e] = ()
            elabels[e] = ()
            return None

        def vertex_rec(j: int, placed: int):
            if j == len(self.vsides):
                return edge_rec(0, placed)
            v = self.vsides[j]
            for x in labels:
                if placed & bit[x]:
                    continue
                vleaf[v] = bit[x]
                vlabel[v] = x
                new = placed | bit[x]
                if self.displays_restricted(new, vleaf, eleaves):
                    found = vertex_rec(j + 1, new)
                    if found is not None:
                        return found
            vleaf.pop(v, None)
            vlabel.pop(v, None)
            return None

        return vertex_rec(0, 0)


def _search_one(args) -> tuple[tuple[dict, Network] | None, SearchStats]:
    g, labels, trees = args
    search = _Search(g, labels, trees, ArrowIndex(trees))
    return search.run(), search.stats


# ---------------------------------------------------------------------------
# Top level


@dataclass
class SolveResult:
    r: int
    witness: Network
    core_witness: Network
    core_instance: Instance
    generator: Generator | None = None
    assignment: dict[Side, tuple[str, ...]] = field(default_factory=dict)


def _default_jobs() -> int:
    env = os.environ.get("HYBKER_JOBS")
    if env:
        return max(1, int(env))
    return 1


def solve_core(trees: Sequence[Tree], kmax: int, jobs: int | None = None, log=None
               ) -> tuple[int, Network, Generator | None, dict] | None:
    """Solve a subtree-reduced tree set directly (no reduction, no lifting)."""
    trees = tuple(trees)
    labels = sorted(trees[0].leaves)
    every = set().union(*(t.clusters for t in trees))
    if compatible_clusters(every):
        return 0, Network.from_tree(tree_from_clusters(labels, every)), None, {}
    jobs = _default_jobs() if jobs is None else max(1, jobs)
    for kp in range(1, kmax + 1):
        gens = enumerate_generators(kp)
        tasks = [(g, labels, trees) for g in gens]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_search_one, tasks))
        else:
            outcomes = []
            for task in tasks:
                outcomes.append(_search_one(task))
                if outcomes[-1][0] is not None:
                    break
        if log is not None:
            nodes = sum(st.nodes for _, st in outcomes)
            ext = sum(st.extensions for _, st in outcomes)
            log(f"k'={kp}: {len(outcomes)}/{len(gens)} generators, {nodes} search nodes, {ext} extensions")
        # lowest generator index wins, whatever the evaluation order
        for g, (res, _) in zip(gens, outcomes):
            if res is not None:
                full, net = res
                return kp, net, g, full
    return None


def solve_xp(ts: Instance, k: int | None = None, jobs: int | None = None, log=None) -> SolveResult | None:
    """Smallest ``r <= k`` with a network displaying all trees, or None.

    The subtree reduction is applied first; the network found for the
    reduced trees is expanded back to the original labels.
    """
    from .kernel import SubtreeRecord, _lift_subtree, subtree_reduce_once

    kmax = ts.k if k is None else k
    if kmax > GENERATOR_CEILING:
        raise CapacityError(f"solver is limited to k <= {GENERATOR_CEILING} (got {kmax})")
    cur = ts
    records: list[SubtreeRecord] = []
    counter = 0
    while True:
        step = subtree_reduce_once(cur, counter)
        if step is None:
            break
        cur, rec = step
        counter = int(rec.fresh_label[4:]) + 1
        records.append(rec)
    found = solve_core(cur.trees, kmax, jobs, log)
    if found is None:
        return None
    r, core, gen, full = found
    net = core
    for rec in reversed(records):
        net = _lift_subtree(net, rec)
    return SolveResult(r, net, core, cur, gen, full)


def __getattr__(name: str):
    if name == "brute_force_r":
        from .oracle import brute_force_r
        return brute_force_r
    raise AttributeError(name)
