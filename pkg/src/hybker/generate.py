"""Seeded random instances: trees displayed by a random network."""

from __future__ import annotations

import random
import string
from dataclasses import dataclass

from .networks import Network, cleanup, reticulation_number
from .trees import Instance, Tree

DEFAULT_SEED = 1


def leaf_labels(n: int) -> list[str]:
    if n <= 26:
        return list(string.ascii_lowercase[:n])
    return [f"x{i}" for i in range(1, n + 1)]


def random_tree(labels: list[str], rng: random.Random) -> Tree:
    """Random rooted binary tree by repeatedly joining two random subtrees."""
    pool: list = list(labels)
    rng.shuffle(pool)
    while len(pool) > 1:
        i, j = sorted(rng.sample(range(len(pool)), 2))
        b = pool.pop(j)
        a = pool.pop(i)
        pool.append((a, b))
    return Tree.from_nested(pool[0])


def _reaches(net: Network, src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for w in net.succ[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def random_network(labels: list[str], r_gen: int, rng: random.Random, max_tries: int = 1000) -> Network:
    """Random binary tree plus ``r_gen`` random acyclic cross edges."""
    net = Network.from_tree(random_tree(labels, rng))
    for _ in range(r_gen):
        for _attempt in range(max_tries):
            edges = sorted(set(net.edges()))
            (a, b), (c, d) = rng.sample(edges, 2)
            if _reaches(net, d, a) or (a, b) == (c, d):
                continue
            s = net.subdivide(a, b)
            h = net.subdivide(c, d)
            net.add_edge(s, h)
            break
        else:
            raise ValueError("could not place a reticulation edge")
    return cleanup(net)


def random_displayed_tree(net: Network, rng: random.Random) -> Tree:
    g = net.copy()
    for r in sorted(g.reticulations):
        keep = rng.choice(sorted(g.pred[r]))
        for u in list(g.pred[r]):
            if u != keep:
                g.remove_edge(u, r)
        while g.pred[r].count(keep) > 1:
            g.remove_edge(keep, r)
    return cleanup(g).to_tree()


def random_contraction(t: Tree, p: float, rng: random.Random) -> Tree:
    cut = [v for v in t.internal_vertices() if v != t.root and rng.random() < p]
    return t.contract(cut) if cut else t


@dataclass
class Generated:
    instance: Instance
    network: Network
    seed: int
    r_gen: int
    p_contract: float

    def manifest(self) -> dict:
        from .newick import serialize_network
        return {
            "seed": self.seed,
            "n": self.instance.n,
            "t": self.instance.t,
            "r_gen": self.r_gen,
            "p_contract": self.p_contract,
            "network": serialize_network(self.network),
            "network_reticulations": reticulation_number(self.network),
            "max_outdegree": self.instance.max_outdegree,
        }


def generate(n: int, t: int, r_gen: int, seed: int = DEFAULT_SEED, p_contract: float = 0.3,
             k: int = 1, max_outdegree: int | None = None) -> Generated:
    """Sample ``t`` trees displayed by a random network with ``r_gen`` reticulations.

    With ``max_outdegree`` set, samples are redrawn until no tree exceeds it.
    """
    if n < 2 or t < 1 or r_gen < 0 or not 0.0 <= p_contract <= 1.0:
        raise ValueError("need n >= 2, t >= 1, r >= 0 and 0 <= p_contract <= 1")
    if max_outdegree is not None and max_outdegree < 2:
        raise ValueError("max_outdegree must be at least 2")
    rng = random.Random(seed)
    labels = leaf_labels(n)
    net = random_network(labels, r_gen, rng)
    while True:
        trees = [random_contraction(random_displayed_tree(net, rng), p_contract, rng) for _ in range(t)]
        inst = Instance(tuple(trees), k)
        if max_outdegree is None or inst.max_outdegree <= max_outdegree:
            return Generated(inst, net, seed, r_gen, p_contract)
