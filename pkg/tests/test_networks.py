import itertools
import random

import pytest
from hypothesis import assume, given, strategies as st

from hybker.generate import leaf_labels, random_displayed_tree, random_network, random_tree
from hybker.networks import (Network, NetworkError, binarize, cleanup, displayed_trees,
                             displays, displays_all, has_nontrivial_pendant_subtree, isomorphic,
                             reconstruct, reticulation_number, underlying_generator)
from hybker.newick import parse_network, parse_tree
from hybker.solver import enumerate_generators
from hybker.trees import Tree
from strategies import networks


# ---------------------------------------------------------------------------
# Oracles and helpers


def display_oracle(n: Network, t: Tree) -> bool:
    """Try every edge subset: a displayed tree is a subgraph whose vertices
    have indegree at most one and which reaches every leaf from the root;
    ``t`` is displayed iff its clusters occur among the subgraph's reach sets."""
    edges = n.edges()
    root = n.root
    leaves = n.leaves
    target = t.clusters
    for size in range(len(edges) + 1):
        for sub in itertools.combinations(range(len(edges)), size):
            chosen = [edges[i] for i in sub]
            heads = [v for _, v in chosen]
            if len(heads) != len(set(heads)):
                continue
            succ: dict[int, list[int]] = {}
            for u, v in chosen:
                succ.setdefault(u, []).append(v)
            reach: dict[int, frozenset[str]] = {}

            def below(v: int) -> frozenset[str]:
                if v not in reach:
                    out = {n.label[v]} if v in n.label else set()
                    for w in succ.get(v, ()):
                        out |= below(w)
                    reach[v] = frozenset(out)
                return reach[v]

            if below(root) != leaves:
                continue
            if target <= set(reach.values()):
                return True
    return False


def contract_edge(n: Network, u: int, v: int) -> Network:
    g = n.copy()
    for w in list(g.succ[v]):
        g.remove_edge(v, w)
        g.add_edge(u, w)
    for p in list(g.pred[v]):
        g.remove_edge(p, v)
    g.remove_vertex(v)
    return g


def messy_graph(seed: int) -> Network:
    """A random network roughed up with debris the cleanup rules remove."""
    rng = random.Random(seed)
    n = random_network(leaf_labels(rng.randint(3, 7)), rng.randint(0, 3), rng)
    g = n.copy()
    for _ in range(rng.randint(1, 4)):
        op = rng.randrange(4)
        edges = g.edges()
        if op == 0:
            u, v = rng.choice(edges)
            g.subdivide(u, v)
        elif op == 1:
            u, v = rng.choice(edges)
            g.add_edge(u, v)
        elif op == 2:
            leaves = sorted(g.label)
            if len(leaves) > 2:
                x = rng.choice(leaves)
                del g.label[x]
        else:
            u, v = rng.choice(edges)
            d = g.subdivide(u, v)
            g.add_edge(d, g.add_vertex())
    return g


# ---------------------------------------------------------------------------


class TestBasics:
    def test_reticulation_number_fig1(self, fig1):
        n, t = fig1
        assert reticulation_number(n) == 2
        assert displays(n, t)

    def test_tree_has_zero(self):
        assert reticulation_number(Network.from_tree(parse_tree("((a,b),c);"))) == 0

    def test_validate_rejects_labelled_internal(self):
        n = Network.from_edges([(0, 1), (0, 2), (1, 3), (1, 4)], {1: "a", 2: "b", 3: "c", 4: "d"})
        with pytest.raises(NetworkError):
            n.validate()

    def test_to_tree_round_trip(self):
        t = parse_tree("((a,b),(c,d,e));")
        assert Network.from_tree(t).to_tree().clusters == t.clusters

    def test_has_pendant_subtree(self):
        assert has_nontrivial_pendant_subtree(parse_network("((a,b),c);"))
        assert not has_nontrivial_pendant_subtree(parse_network("((a,(h)#H1),(#H1,b));"))


class TestCleanup:
    def test_suppresses_chain(self):
        g = Network.from_edges([(0, 1), (1, 2), (2, 3), (2, 4)], {3: "a", 4: "b"})
        out = cleanup(g)
        assert isomorphic(out, parse_network("(a,b);"))

    def test_merges_parallel_edges(self):
        g = Network.from_edges([(0, 1), (0, 2), (1, 3), (1, 3), (3, 4), (2, 5), (2, 6)],
                               {4: "a", 5: "b", 6: "c"})
        out = cleanup(g)
        assert reticulation_number(out) == 0
        assert isomorphic(out, parse_network("(a,(b,c));"))

    def test_removes_unlabelled_leaves(self):
        g = Network.from_edges([(0, 1), (0, 2), (1, 3), (1, 4)], {2: "a", 3: "b"})
        assert isomorphic(cleanup(g), parse_network("(a,b);"))

    def test_multiple_roots_raise(self):
        g = Network.from_edges([(0, 2), (1, 3)], {2: "a", 3: "b"})
        with pytest.raises(NetworkError):
            cleanup(g)

    def test_confluent_on_many_graphs(self):
        checked = 0
        for seed in range(150):
            g = messy_graph(seed)
            outcomes = []
            for order_seed in range(5):
                try:
                    outcomes.append(cleanup(g, random.Random(order_seed)))
                except NetworkError:
                    outcomes.append(None)
            if outcomes[0] is None:
                assert all(o is None for o in outcomes)
                continue
            assert all(o is not None and isomorphic(o, outcomes[0]) for o in outcomes)
            checked += 1
        assert checked >= 100

    @given(networks())
    def test_idempotent(self, n):
        assert isomorphic(cleanup(n), n)


class TestGenerators:
    def test_fig2_sides(self, fig2):
        g, assignment = underlying_generator(fig2)
        assert g.k == 4
        assert len(g.vertex_sides) == 2
        assert len(g.edge_sides) == 13
        by_leaf = {x: s for s, xs in assignment.items() for x in xs}
        assert by_leaf["d"] == by_leaf["e"] == by_leaf["f"]
        assert by_leaf["d"].kind == "e"
        assert assignment[by_leaf["d"]] == ("d", "e", "f")
        assert by_leaf["g"].kind == by_leaf["h"].kind == "v"

    def test_fig2_round_trip(self, fig2):
        g, assignment = underlying_generator(fig2)
        assert isomorphic(reconstruct(g, assignment), fig2)

    def test_rejects_pendant_subtrees(self):
        with pytest.raises(NetworkError):
            underlying_generator(parse_network("(((a,b),(h)#H1),(#H1,c));"))

    def test_rejects_trees(self):
        with pytest.raises(NetworkError):
            underlying_generator(parse_network("(a,(b,(c,d)));"))

    @given(networks(min_leaves=3, max_leaves=9, max_ret=4))
    def test_round_trip_random(self, n):
        assume(reticulation_number(n) >= 1 and not has_nontrivial_pendant_subtree(n))
        assume(n.is_binary())
        g, assignment = underlying_generator(n)
        k = g.k
        assert len(g.edge_sides) <= 4 * k - 1
        assert len(g.vertex_sides) <= k
        assert isomorphic(reconstruct(g, assignment), n)

    @given(st.sampled_from((1, 2)), st.data())
    def test_round_trip_from_generators(self, k, data):
        gens = enumerate_generators(k)
        g = gens[data.draw(st.integers(0, len(gens) - 1))]
        seed = data.draw(st.integers(0, 2**32 - 1))
        rng = random.Random(seed)
        labels = iter(leaf_labels(40))
        assignment = {}
        for s in g.sides:
            if s.kind == "v":
                assignment[s] = (next(labels),)
            else:
                assignment[s] = tuple(next(labels) for _ in range(rng.randint(1, 3)))
        n = reconstruct(g, assignment)
        assert reticulation_number(n) == k
        g2, a2 = underlying_generator(n)
        assert isomorphic(reconstruct(g2, a2), n)
        assert sorted(map(len, a2.values())) == sorted(map(len, assignment.values()))


class TestDisplay:
    def test_fig1_displays_tree(self, fig1):
        n, t = fig1
        assert displays(n, t)
        assert not displays(n, parse_tree("((a,d),b,c);"))

    def test_label_mismatch_raises(self, fig1):
        n, _ = fig1
        with pytest.raises(NetworkError):
            displays(n, parse_tree("(a,b,c);"))

    def test_tree_displays_its_contractions(self):
        n = Network.from_tree(parse_tree("((a,b),(c,d));"))
        assert displays(n, parse_tree("(a,b,(c,d));"))
        assert not displays(n, parse_tree("((a,c),b,d);"))

    def test_displayed_trees_of_fig1(self, fig1):
        n, _ = fig1
        shown = displayed_trees(n)
        assert 1 <= len(shown) <= 4

    @given(networks(min_leaves=2, max_leaves=4, max_ret=2), st.integers(0, 2**32 - 1))
    def test_against_edge_subset_oracle(self, n, seed):
        assume(len(n.succ) <= 8)
        rng = random.Random(seed)
        labels = sorted(n.leaves)
        candidates = [random_displayed_tree(n, rng), random_tree(labels, rng)]
        candidates += [Tree.from_nested(tuple(labels))] if len(labels) >= 2 else []
        for t in candidates:
            assert displays(n, t) == display_oracle(n, t)

    @given(networks(min_leaves=3, max_leaves=6, max_ret=3), st.integers(0, 2**32 - 1))
    def test_random_switching_is_displayed(self, n, seed):
        t = random_displayed_tree(n, random.Random(seed))
        assert displays(n, t)
        assert displays_all(n, [t])


class TestBinarize:
    def test_high_outdegree(self):
        n = parse_network("(a,b,c,d);")
        b = binarize(n)
        assert b.is_binary()
        assert displays(b, parse_tree("(a,b,c,d);"))

    def test_high_indegree(self):
        n = parse_network("((a,#H1),(b,#H1),(c,(d)#H1));")
        assert reticulation_number(n) == 2
        b = binarize(n)
        assert b.is_binary()
        assert reticulation_number(b) == 2

    @given(networks(min_leaves=3, max_leaves=7, max_ret=3), st.integers(0, 2**32 - 1))
    def test_contracted_networks(self, n, seed):
        rng = random.Random(seed)
        # make n non-binary by contracting random edges into their tails
        for _ in range(rng.randint(1, 3)):
            cands = [(u, v) for u, v in n.edges()
                     if v not in n.label and len(n.pred[v]) == 1 and u != n.root
                     and not set(n.succ[u]) & set(n.succ[v])]
            if not cands:
                break
            u, v = rng.choice(sorted(cands))
            n = contract_edge(n, u, v)
        n.validate()
        before = max(n.succ)
        b = binarize(n)
        assert b.is_binary()
        assert reticulation_number(b) == reticulation_number(n)
        # contracting the edges at the added vertices recovers n
        g = b
        for v in sorted(x for x in b.succ if x > before):
            if len(g.pred[v]) == 1:
                g = contract_edge(g, g.pred[v][0], v)
            else:
                g = _contract_up(g, v)
        assert isomorphic(g, n)


def _contract_up(g: Network, v: int) -> Network:
    """Contract the single out-edge of an added reticulation vertex."""
    (w,) = g.succ[v]
    h = g.copy()
    for p in list(h.pred[v]):
        h.remove_edge(p, v)
        h.add_edge(p, w)
    h.remove_edge(v, w)
    h.remove_vertex(v)
    return h
