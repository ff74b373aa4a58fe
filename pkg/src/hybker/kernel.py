"""Kernelization by subtree and chain reduction, with lifting of solutions.

Two modes are offered.  ``kernelize_trees`` bounds the kernel by a function
of ``k`` and the number of trees ``t``; it truncates q-star chains with
q-dependent thresholds.  ``kernelize_degree`` bounds it by ``k`` and the
maximum outdegree and truncates every long common chain alike.  Each
applied reduction is logged in a :class:`ReductionTrace`, which is enough to
replay the reductions and to turn a network for the kernel back into a
network for the original trees.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .networks import (Network, NetworkError, Side, cleanup, displays_all,
                       has_nontrivial_pendant_subtree, reticulation_number,
                       underlying_generator)
from .trees import Chain, Instance, Tree, TreeError, common_chains, find_common_pendant_subtree

TRACE_SCHEMA = "trace-v1"
FRESH_STEM = "__ST"


class LiftError(RuntimeError):
    """A kernel solution could not be turned into one for the original trees."""


@dataclass(frozen=True)
class SubtreeRecord:
    fresh_label: str
    subtree: Tree
    roots: tuple[int, ...] = ()

    def to_json(self) -> dict:
        from .newick import serialize_tree
        return {
            "type": "subtree",
            "fresh_label": self.fresh_label,
            "subtree_newick": serialize_tree(self.subtree),
            "chain_order": [],
            "threshold": None,
            "removed_suffix": [],
        }


@dataclass(frozen=True)
class ChainRecord:
    chain: tuple[str, ...]
    threshold: int
    q: int | None  # None for the outdegree-bounded mode

    @property
    def kept(self) -> tuple[str, ...]:
        return self.chain[:self.threshold]

    @property
    def removed(self) -> tuple[str, ...]:
        return self.chain[self.threshold:]

    def to_json(self) -> dict:
        return {
            "type": "chain",
            "chain_order": list(self.chain),
            "q": "any" if self.q is None else self.q,
            "threshold": self.threshold,
            "removed_suffix": list(self.removed),
        }


Record = SubtreeRecord | ChainRecord


@dataclass
class ReductionTrace:
    k: int
    mode: str
    records: list[Record] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "k": self.k,
            "mode": self.mode,
            "records": [r.to_json() for r in self.records],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, data: dict) -> "ReductionTrace":
        from .newick import parse_tree
        if data.get("schema") != TRACE_SCHEMA:
            raise ValueError(f"unsupported trace schema {data.get('schema')!r}")
        records: list[Record] = []
        for r in data["records"]:
            if r["type"] == "subtree":
                records.append(SubtreeRecord(r["fresh_label"], parse_tree(r["subtree_newick"])))
            elif r["type"] == "chain":
                q = None if r["q"] == "any" else int(r["q"])
                records.append(ChainRecord(tuple(r["chain_order"]), int(r["threshold"]), q))
            else:
                raise ValueError(f"unknown record type {r['type']!r}")
        return cls(int(data["k"]), data["mode"], records)

    @classmethod
    def loads(cls, text: str) -> "ReductionTrace":
        return cls.from_json(json.loads(text))


@dataclass
class KernelResult:
    instance: Instance
    trace: ReductionTrace
    verdict: str  # "undecided" or "no-by-size"
    bound: int
    history: list[int] = field(default_factory=list)  # leaf count after each step

    @property
    def is_no(self) -> bool:
        return self.verdict == "no-by-size"


# ---------------------------------------------------------------------------
# Single reductions


def _fresh_label(used: Iterable[str], start: int = 0) -> tuple[str, int]:
    used = set(used)
    j = start
    while f"{FRESH_STEM}{j}" in used:
        j += 1
    return f"{FRESH_STEM}{j}", j + 1


def subtree_reduce_once(ts: Instance, counter: int = 0) -> tuple[Instance, SubtreeRecord] | None:
    """Replace one nontrivial maximal common pendant subtree by a fresh leaf."""
    found = find_common_pendant_subtree(ts)
    if found is None:
        return None
    label, _ = _fresh_label(ts.labels, counter)
    trees = [t.replace_pendant(found.leaves, label) for t in ts]
    return ts.with_trees(trees), SubtreeRecord(label, found.subtree, found.roots)


def truncate_chain(ts: Instance, chain: Chain, threshold: int, q: int | None) -> tuple[Instance, ChainRecord]:
    """Delete the chain leaves past position ``threshold`` from every tree."""
    record = ChainRecord(chain.leaves, threshold, q)
    trees = [t.delete_leaves(record.removed) for t in ts]
    return ts.with_trees(trees), record


def chain_reduce_once(ts: Instance, q: int | None, threshold: int,
                      chains: dict | None = None) -> tuple[Instance, ChainRecord] | None:
    """Truncate a maximum common q-star chain longer than ``threshold``.

    ``q=None`` ignores the star count (outdegree-bounded mode).
    """
    if chains is None:
        chains = common_chains(ts)
    pool = [c for c in chains.values() if q is None or c.q == q]
    if q is not None and q >= ts.t:
        return None
    chain = min(pool, key=lambda c: (-c.p, c.leaves), default=None)
    if chain is None or chain.p <= threshold:
        return None
    return truncate_chain(ts, chain, threshold, q)


# ---------------------------------------------------------------------------
# Full kernelizations


def trees_bound(k: int, t: int) -> int:
    return 4 * k * (5 * k) ** t


def degree_bound(k: int, max_outdegree: int) -> int:
    return 20 * k * k * (max_outdegree - 1)


def _kernelize(ts: Instance, mode: str, thresholds) -> tuple[Instance, ReductionTrace, list[int]]:
    trace = ReductionTrace(ts.k, mode)
    history = [ts.n]
    counter = 0
    cur = ts
    while True:
        step = subtree_reduce_once(cur, counter)
        if step is not None:
            cur, rec = step
            counter = int(rec.fresh_label[len(FRESH_STEM):]) + 1
            trace.records.append(rec)
            history.append(cur.n)
            continue
        if cur.n < 2:
            break
        chains = common_chains(cur)
        for q, threshold in thresholds(cur):
            step = chain_reduce_once(cur, q, threshold, chains)
            if step is not None:
                cur, rec = step
                trace.records.append(rec)
                history.append(cur.n)
                break
        else:
            break
    return cur, trace, history


def kernelize_trees(ts: Instance) -> KernelResult:
    """Subtree reduction plus q-star chain truncation, q from t-1 down to 0.

    Any applied reduction restarts from the subtree reduction.
    """
    if ts.k < 1:
        raise ValueError("kernelization needs k >= 1")
    k, t = ts.k, ts.t

    def thresholds(_cur: Instance):
        return [(q, (5 * k) ** (t - q)) for q in range(t - 1, -1, -1)]

    cur, trace, history = _kernelize(ts, "trees", thresholds)
    bound = trees_bound(k, t)
    verdict = "no-by-size" if cur.n > bound else "undecided"
    return KernelResult(cur, trace, verdict, bound, history)


def kernelize_degree(ts: Instance) -> KernelResult:
    """Subtree reduction plus truncation of common chains longer than 5k(D-1).

    D is the maximum outdegree over the input trees.
    """
    if ts.k < 1:
        raise ValueError("kernelization needs k >= 1")
    k = ts.k
    if ts.n < 2:
        return KernelResult(ts, ReductionTrace(k, "degree"), "undecided", 0, [ts.n])
    delta = ts.max_outdegree
    threshold = 5 * k * (delta - 1)

    def thresholds(_cur: Instance):
        return [(None, threshold)]

    cur, trace, history = _kernelize(ts, "degree", thresholds)
    bound = degree_bound(k, delta)
    verdict = "no-by-size" if cur.n > bound else "undecided"
    return KernelResult(cur, trace, verdict, bound, history)


def kernelize(ts: Instance, mode: str = "trees") -> KernelResult:
    if mode == "trees":
        return kernelize_trees(ts)
    if mode == "degree":
        return kernelize_degree(ts)
    raise ValueError(f"unknown kernelization mode {mode!r}")


def replay_trace(original: Instance, trace: ReductionTrace) -> Instance:
    """Apply the logged reductions to ``original`` in order."""
    cur = original
    for rec in trace.records:
        cur = _apply(cur, rec)
    return cur


def _apply(cur: Instance, rec: Record) -> Instance:
    if isinstance(rec, SubtreeRecord):
        leaves = rec.subtree.leaves
        if not leaves <= cur.labels:
            raise TreeError(f"subtree leaves {sorted(leaves - cur.labels)} not in the instance")
        for t in cur:
            found = t.pendant_subtree_vertices(leaves)
            if found is None or not _refines_pendant(rec.subtree, t, leaves):
                raise TreeError(f"{sorted(leaves)} is not a common pendant subtree")
        return cur.with_trees(t.replace_pendant(leaves, rec.fresh_label) for t in cur)
    missing = set(rec.chain) - cur.labels
    if missing:
        raise TreeError(f"chain leaves {sorted(missing)} not in the instance")
    return cur.with_trees(t.delete_leaves(rec.removed) for t in cur)


def _refines_pendant(sub: Tree, t: Tree, leaves: frozenset[str]) -> bool:
    return t.restrict(leaves).clusters <= sub.clusters


# ---------------------------------------------------------------------------
# Networks: moving chains and lifting


def move_chain_to_side(n: Network, chain: Sequence[str], anchor: str) -> Network:
    """Place all of ``chain`` consecutively on the edge side of ``anchor``.

    The anchor's parent ``u`` keeps the last chain leaf; the edge entering
    ``u`` is subdivided by a path carrying the other chain leaves in order.
    The old chain leaves are removed and the result is cleaned up.
    """
    chain = list(chain)
    if anchor not in chain:
        raise ValueError(f"anchor {anchor!r} is not in the chain")
    g = n.copy()
    leaf = g.leaf_map()
    a = leaf[anchor]
    (u,) = g.pred[a]
    if len(g.pred[u]) != 1:
        raise NetworkError(f"anchor {anchor!r} is on a vertex side")
    (w,) = g.pred[u]
    path = []
    top = w
    for _ in chain[:-1]:
        v = g.subdivide(top, u) if top == w else g.subdivide(path[-1], u)
        path.append(v)
        top = v
    for x in chain:
        g.remove_vertex(leaf[x])
    for v, x in zip(path + [u], chain):
        g.add_edge(v, g.add_vertex(x))
    return cleanup(g)


def _append_suffix(n: Network, last: str, suffix: Sequence[str]) -> Network:
    """Hang ``suffix`` as a path on the edge out of the parent of ``last``."""
    g = n.copy()
    x = g.leaf_vertex(last)
    (v,) = g.pred[x]
    others = [w for w in g.succ[v] if w != x]
    if not others:
        raise NetworkError(f"parent of {last!r} has no other child")
    below = others[0]
    top = v
    for y in suffix:
        s = g.subdivide(top, below)
        g.add_edge(s, g.add_vertex(y))
        top = s
    return cleanup(g)


def _sides(n: Network) -> dict[str, Side] | None:
    if not n.is_binary() or has_nontrivial_pendant_subtree(n):
        return None
    try:
        _, assignment = underlying_generator(n)
    except NetworkError:
        return None
    return {x: side for side, xs in assignment.items() for x in xs}


def _anchor_order(n: Network, rec: ChainRecord, k: int) -> list[str]:
    """Candidate anchors: sampled same-side leaves first, then all others."""
    kept = rec.kept
    leaf = n.leaf_map()
    ok = [x for x in kept if len(n.pred[n.pred[leaf[x]][0]]) == 1]
    spacing = max(1, rec.threshold // (5 * k))
    sampled = [kept[i] for i in range(spacing - 1, len(kept), spacing)]
    preferred: list[str] = []
    side_of = _sides(n)
    if side_of is not None:
        for x, y in itertools.combinations(sampled, 2):
            if side_of.get(x) == side_of.get(y) and side_of.get(x, Side("v", 0)).kind == "e":
                preferred += [x, y]
    seen: set[str] = set()
    out = []
    for x in preferred + ok:
        if x in ok and x not in seen:
            seen.add(x)
            out.append(x)
    return out


def _lift_chain(n: Network, rec: ChainRecord, before: Instance, after: Instance, k: int) -> Network:
    r = reticulation_number(n)
    for anchor in _anchor_order(n, rec, k):
        try:
            moved = move_chain_to_side(n, rec.kept, anchor)
            if not displays_all(moved, after):
                continue
            lifted = _append_suffix(moved, rec.kept[-1], rec.removed)
        except NetworkError:
            continue
        if reticulation_number(lifted) <= r and displays_all(lifted, before):
            return lifted
    raise LiftError(f"could not reinsert chain suffix {list(rec.removed)}")


def _lift_subtree(n: Network, rec: SubtreeRecord) -> Network:
    g = n.copy()
    x = g.leaf_vertex(rec.fresh_label)
    del g.label[x]
    sub = rec.subtree
    ids = {sub.root: x}
    for v in range(len(sub)):
        if v != sub.root:
            ids[v] = g.add_vertex(sub.label[v])
    for v in range(len(sub)):
        for c in sub.children[v]:
            g.add_edge(ids[v], ids[c])
    if sub.is_leaf(sub.root):
        g.label[x] = sub.label[sub.root]
    return g


def lift_solution(original: Instance, result: KernelResult, solved: Network) -> Network:
    """Turn a network for the kernel into one for ``original``.

    Raises :class:`LiftError` if a chain cannot be reinserted; the result is
    checked to display every original tree.
    """
    stages = [original]
    for rec in result.trace.records:
        stages.append(_apply(stages[-1], rec))
    if solved.leaves != stages[-1].labels:
        raise LiftError("solution is not on the kernel's label set")
    k = max(1, result.trace.k)
    n = solved
    for i in range(len(result.trace.records) - 1, -1, -1):
        rec = result.trace.records[i]
        if isinstance(rec, SubtreeRecord):
            n = _lift_subtree(n, rec)
        else:
            n = _lift_chain(n, rec, stages[i], stages[i + 1], k)
    if not displays_all(n, original):
        raise LiftError("lifted network does not display the original trees")
    return n
