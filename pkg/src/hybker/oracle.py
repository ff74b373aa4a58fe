"""Brute-force reticulation number for tiny instances.

Independent of the generator machinery: it grows networks from every
binary tree shape by inserting reticulation edges one at a time (subdivide
two edges, connect the new vertices, reject cycles) and evaluates display by
switching off one in-edge per reticulation and comparing cluster sets.

To keep this fast the family is built once per leaf count on anonymous
leaf positions; an instance is then matched against it under every
assignment of labels to positions.  Each network is summarized by its
profile, the set of binary trees it displays.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from functools import lru_cache
from typing import Sequence

from .solver import CapacityError
from .trees import Instance, Tree

MAX_LEAVES = 6
MAX_K = 2

Shape = tuple  # nested tuples of leaf positions


def _shapes(n: int) -> list:
    """Unlabelled rooted binary trees with ``n`` leaves (as nested sizes)."""
    @lru_cache(maxsize=None)
    def build(m: int) -> tuple:
        if m == 1:
            return ("*",)
        out = []
        for left in range(1, m // 2 + 1):
            right = m - left
            for a in build(left):
                for b in build(right):
                    if left == right and repr(a) > repr(b):
                        continue
                    out.append((a, b))
        return tuple(out)
    return list(build(n))


def _shape_edges(shape) -> tuple[int, list[tuple[int, int]], dict[int, int]]:
    """Graph of a shape with a virtual root edge; leaves get positions 0..n-1."""
    edges: list[tuple[int, int]] = []
    leaf: dict[int, int] = {}
    counter = [1]  # vertex 0 is the virtual root

    def walk(node) -> int:
        v = counter[0]
        counter[0] += 1
        if node == "*":
            leaf[v] = len(leaf)
            return v
        for c in node:
            edges.append((v, walk(c)))
        return v

    top = walk(shape)
    edges.append((0, top))
    return counter[0], edges, leaf


def _reach(n_vertices: int, edges: list[tuple[int, int]]) -> list[set[int]]:
    succ = defaultdict(list)
    for u, v in edges:
        succ[u].append(v)
    out = []
    for s in range(n_vertices):
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for w in succ[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        out.append(seen)
    return out


def _insertions(n_vertices: int, edges: list[tuple[int, int]]):
    """All graphs obtained by one reticulation-edge insertion."""
    reach = _reach(n_vertices, edges)
    m = len(edges)
    for i in range(m):
        a, b = edges[i]
        for j in range(m):
            c, d = edges[j]
            if c == 0:
                continue  # head on the virtual root edge
            s, h = n_vertices, n_vertices + 1
            if i == j:
                new = [e for x, e in enumerate(edges) if x != i]
                new += [(a, s), (s, h), (h, b), (s, h)]
                yield n_vertices + 2, new
                continue
            # new edge s -> h closes a cycle iff a is reachable from d
            if a in reach[d]:
                continue
            new = [e for x, e in enumerate(edges) if x not in (i, j)]
            new += [(a, s), (s, b), (c, h), (h, d), (s, h)]
            yield n_vertices + 2, new


def _profile(n_vertices: int, edges: list[tuple[int, int]], leaf: dict[int, int]) -> frozenset:
    """Binary trees displayed by the graph, each as a frozenset of cluster masks."""
    ins = defaultdict(list)
    succ = defaultdict(list)
    for idx, (u, v) in enumerate(edges):
        ins[v].append(idx)
        succ[u].append((idx, v))
    rets = [v for v in range(n_vertices) if len(ins[v]) == 2]
    # reverse topological order
    indeg = {v: len(ins[v]) for v in range(n_vertices)}
    order = []
    ready = [v for v in range(n_vertices) if indeg[v] == 0]
    while ready:
        u = ready.pop()
        order.append(u)
        for _, w in succ[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    order.reverse()
    trees = set()
    for pick in itertools.product((0, 1), repeat=len(rets)):
        dropped = {ins[r][1 - p] for r, p in zip(rets, pick)}
        mask = {}
        cl = set()
        for v in order:
            if v in leaf:
                mask[v] = 1 << leaf[v]
                continue
            m = 0
            for idx, w in succ[v]:
                if idx not in dropped:
                    m |= mask[w]
            mask[v] = m
            if m & (m - 1):
                cl.add(m)
        trees.add(frozenset(cl))
    return frozenset(trees)


@lru_cache(maxsize=None)
def _family(n: int, kmax: int) -> tuple[dict, dict]:
    """Profiles of all networks with up to ``kmax`` insertions on ``n`` leaves.

    Returns ``(level, index)``: the smallest insertion count per profile and,
    for each displayed binary tree, the profiles containing it.
    """
    level: dict[frozenset, int] = {}
    frontier = []
    for shape in _shapes(n):
        nv, edges, leaf = _shape_edges(shape)
        frontier.append((nv, edges, leaf))
        level.setdefault(_profile(nv, edges, leaf), 0)
    for k in range(1, kmax + 1):
        nxt = []
        for nv, edges, leaf in frontier:
            for nv2, edges2 in _insertions(nv, edges):
                prof = _profile(nv2, edges2, leaf)
                if prof not in level:
                    level[prof] = k
                if k < kmax:
                    nxt.append((nv2, edges2, leaf))
        frontier = nxt
    index: dict[frozenset, list[frozenset]] = defaultdict(list)
    for prof in level:
        for d in prof:
            index[d].append(prof)
    return level, dict(index)


def brute_force_r(ts: Instance | Sequence[Tree], kmax: int = MAX_K) -> int | None:
    """Smallest number of reticulations (up to ``kmax``) of a network
    displaying all trees, or None if more are needed."""
    trees = ts.trees if isinstance(ts, Instance) else tuple(ts)
    labels = sorted(trees[0].leaves)
    n = len(labels)
    if n > MAX_LEAVES:
        raise CapacityError(f"oracle is limited to {MAX_LEAVES} leaves (got {n})")
    if kmax > MAX_K:
        raise CapacityError(f"oracle is limited to k <= {MAX_K} (got {kmax})")
    if kmax < 0:
        return None
    if n <= 2:
        return 0
    level, index = _family(n, kmax)
    clusters = [[frozenset(c) for c in t.clusters] for t in trees]
    order = sorted(range(len(trees)), key=lambda i: -len(clusters[i]))
    pivot, rest = order[0], order[1:]
    best: int | None = None
    for perm in itertools.permutations(range(n)):
        pos = {x: perm[i] for i, x in enumerate(labels)}
        masks = [{sum(1 << pos[x] for x in c) for c in cs} for cs in clusters]
        piv = masks[pivot]
        seen: set[frozenset] = set()
        for d, profs in index.items():
            if not piv <= d:
                continue
            for prof in profs:
                if prof in seen:
                    continue
                seen.add(prof)
                lv = level[prof]
                if best is not None and lv >= best:
                    continue
                if all(any(masks[i] <= d2 for d2 in prof) for i in rest):
                    best = lv
        if best == 0:
            break
    return best
