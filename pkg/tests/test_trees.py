import itertools
import random

import pytest
from hypothesis import assume, given, strategies as st

from hybker.kernel import subtree_reduce_once
from hybker.newick import parse_tree, serialize_tree
from hybker.trees import (ChainOrderError, Instance, Tree, TreeError, common_chains,
                          compatible_clusters, find_common_pendant_subtree, is_chainable,
                          is_refinement, max_common_chain, max_q_star_chain, tree_from_clusters,
                          verify_chain)
from strategies import instances, trees


# ---------------------------------------------------------------------------
# Independent oracles, written only in terms of nested tuples and cluster sets


def _contract_nested(node, drop: set[int], counter: list[int]):
    """Contract the internal non-root nodes whose preorder index is in ``drop``."""
    if isinstance(node, str):
        return [node]
    out = []
    for c in node:
        if isinstance(c, str):
            out.append(c)
            continue
        counter[0] += 1
        idx = counter[0]
        inner = _contract_nested(c, drop, counter)
        if idx in drop:
            out.extend(inner)
        else:
            out.append(tuple(inner))
    return out


def _internal_count(node) -> int:
    if isinstance(node, str):
        return 0
    return sum(1 + _internal_count(c) for c in node if not isinstance(c, str))


def refinement_oracle(fine: Tree, coarse: Tree) -> bool:
    nested = fine.to_nested()
    m = _internal_count(nested)
    target = serialize_tree(coarse)
    for size in range(m + 1):
        for drop in itertools.combinations(range(1, m + 1), size):
            t = Tree.from_nested(tuple(_contract_nested(nested, set(drop), [0])))
            if serialize_tree(t) == target:
                return True
    return False


def parent_cluster(t: Tree, x: str) -> frozenset[str]:
    return min((c for c in t.clusters if x in c), key=len)


def chain_oracle(seq, t: Tree) -> tuple[bool, bool]:
    """Chain test using nothing but the cluster set of ``t``."""
    if len(seq) < 2 or len(set(seq)) != len(seq):
        return False, False
    runs: list[list[str]] = []
    pcs: list[frozenset[str]] = []
    for x in seq:
        pc = parent_cluster(t, x)
        if pcs and pcs[-1] == pc:
            runs[-1].append(x)
        else:
            if pc in pcs:
                return False, False
            runs.append([x])
            pcs.append(pc)
    for a, b in zip(pcs, pcs[1:]):
        if not b < a or any(b < c < a for c in t.clusters):
            return False, False
    for i in range(1, len(runs) - 1):
        if pcs[i] - pcs[i + 1] != set(runs[i]):
            return False, False
    pendant = len(runs) == 1 or pcs[-1] == set(runs[-1])
    return True, pendant


def is_pendant_leafset(t: Tree, leaves: frozenset[str]) -> bool:
    """Some vertex has a set of children whose leaf sets partition ``leaves``."""
    top = min((c for c in t.clusters if leaves <= c), key=len)
    inner = [c for c in t.clusters if c < top]
    kids = [c for c in inner if not any(c < d for d in inner)]
    kids += [frozenset([x]) for x in top if not any(x in c for c in kids)]
    return all(c <= leaves or not (c & leaves) for c in kids)


def reduce_subtrees(inst: Instance) -> Instance:
    counter = 0
    while True:
        step = subtree_reduce_once(inst, counter)
        if step is None:
            return inst
        inst = step[0]
        counter += 1


# ---------------------------------------------------------------------------


class TestTree:
    def test_lca_and_depth(self):
        t = parse_tree("((a,b),(c,d));")
        lv = t.leaf_vertex
        assert t.lca(lv["a"], lv["b"]) == t.parent_of("a")
        assert t.lca(lv["a"], lv["c"]) == t.root
        assert t.depth(lv["a"]) == 2

    def test_restrict_suppresses(self):
        t = parse_tree("((a,b),(c,(d,e)));")
        assert serialize_tree(t.restrict("ace")) == "(a,(c,e));"

    def test_restrict_root_outdegree_one(self):
        t = parse_tree("((a,b),c);")
        assert serialize_tree(t.restrict("ab")) == "(a,b);"

    def test_replace_pendant(self):
        t = parse_tree("((a,b),(c,d));")
        assert serialize_tree(t.replace_pendant(frozenset("cd"), "z")) == "((a,b),z);"

    def test_replace_non_pendant_raises(self):
        t = parse_tree("((a,b),(c,d));")
        with pytest.raises(TreeError):
            t.replace_pendant(frozenset("bc"), "z")

    def test_tree_from_clusters(self):
        t = tree_from_clusters("abcd", [frozenset("ab"), frozenset("abc")])
        assert serialize_tree(t) == "(((a,b),c),d);"

    def test_compatible_clusters(self):
        assert compatible_clusters([frozenset("ab"), frozenset("abc"), frozenset("de")])
        assert not compatible_clusters([frozenset("ab"), frozenset("bc")])

    def test_instance_rejects_mixed_labels(self):
        with pytest.raises(TreeError):
            Instance((parse_tree("(a,b);"), parse_tree("(a,c);")), 1)


class TestRefinement:
    def test_binary_refines_star(self):
        assert is_refinement(parse_tree("((a,b),c);"), parse_tree("(a,b,c);"))
        assert not is_refinement(parse_tree("(a,b,c);"), parse_tree("((a,b),c);"))

    @given(trees(min_leaves=3, max_leaves=6, p_contract=0.0), st.integers(0, 2**32 - 1), st.booleans())
    def test_against_contraction_oracle(self, fine, seed, related):
        rng = random.Random(seed)
        if related:
            from hybker.generate import random_contraction
            coarse = random_contraction(fine, 0.5, rng)
        else:
            from hybker.generate import random_contraction, random_tree
            coarse = random_contraction(random_tree(sorted(fine.leaves), rng), 0.5, rng)
        assert is_refinement(fine, coarse) == refinement_oracle(fine, coarse)

    @given(trees(min_leaves=3, max_leaves=6), trees(min_leaves=3, max_leaves=6))
    def test_oracle_on_arbitrary_pairs(self, a, b):
        assume(a.leaves == b.leaves)
        assert is_refinement(a, b) == refinement_oracle(a, b)


class TestPendantSubtree:
    def test_fig3(self, fig3):
        ps = find_common_pendant_subtree(fig3)
        assert ps is not None
        assert ps.leaves == frozenset("fgh")
        for t in fig3:
            assert frozenset("fgh") in t.clusters

    def test_none_without_common_cherry(self):
        ts = (parse_tree("((a,b),(c,d));"), parse_tree("((a,c),(b,d));"))
        assert find_common_pendant_subtree(ts) is None

    def test_grows_beyond_a_cherry(self):
        ts = (parse_tree("((((a,b),c),d),e);"), parse_tree("((c,(a,b)),(d,e));"))
        ps = find_common_pendant_subtree(ts)
        assert ps.leaves == frozenset("abc")

    def test_pendant_may_take_some_children_of_a_vertex(self):
        # d and e hang off the root of the first tree, so the whole second
        # tree refines a pendant subtree of the first
        ts = (parse_tree("(((a,b),c),d,e);"), parse_tree("((c,(a,b)),(d,e));"))
        ps = find_common_pendant_subtree(ts)
        assert ps.leaves == frozenset("abcde")

    @given(instances(max_leaves=8))
    def test_exists_iff_common_sibling_pair(self, inst):
        pair_scan = any(
            all(parent_cluster(t, x) == parent_cluster(t, y) for t in inst)
            for x, y in itertools.combinations(sorted(inst.labels), 2)
        )
        assert (find_common_pendant_subtree(inst) is not None) == pair_scan

    @given(instances(max_leaves=8))
    def test_result_is_pendant_and_maximal(self, inst):
        ps = find_common_pendant_subtree(inst)
        assume(ps is not None)
        leaves = ps.leaves
        for t in inst:
            assert is_pendant_leafset(t, leaves)
            assert is_refinement(ps.subtree, t.restrict(leaves))
        # keep reducing; the collapsed subtree must never be absorbed again
        if leaves != inst.labels:
            z = "__zz"
            keep = sorted(leaves)[0]
            cur = inst.with_trees(t.delete_leaves(leaves - {keep}).relabel({keep: z}) for t in inst)
            counter = 0
            while cur.n > 1:
                step = subtree_reduce_once(cur, counter)
                if step is None:
                    break
                cur, rec = step
                counter += 1
                assert z not in rec.subtree.leaves


class TestChains:
    def test_verify_chain_caterpillar(self):
        t = parse_tree("((d,(c,(b,a))),e);")
        assert verify_chain(("d", "c", "b", "a"), t) == (True, True)
        assert verify_chain(("c", "b"), t) == (True, False)
        assert verify_chain(("a", "b", "c"), t)[0] is False

    def test_verify_chain_star_top(self):
        t = parse_tree("(a,b,c,(d,e));")
        assert verify_chain(("a", "b", "c"), t) == (True, True)
        assert verify_chain(("a", "b", "d"), t) == (True, False)

    def test_fig3_chain_after_subtree_reduction(self, fig3):
        reduced = reduce_subtrees(fig3)
        chain = max_q_star_chain(reduced, 1)
        assert chain.leaves == ("d", "c", "b", "a")
        assert chain.q == 1

    def test_ambiguous_order_is_flagged(self):
        # a caterpillar and a star share the cherry {a,b}; the precondition fails
        ts = (parse_tree("(d,(c,(b,a)));"), parse_tree("(a,b,c,d);"))
        with pytest.raises(ChainOrderError):
            is_chainable("abcd", ts)

    def test_q_equal_t_returns_none(self):
        ts = (parse_tree("(a,b,c);"),)
        assert max_q_star_chain(ts, 1) is None

    def test_long_chain(self):
        xs = [f"x{i}" for i in range(1, 31)]
        a = "(y1,(y2,y3))"
        b = "((y1,y2),y3)"
        def cat(sub):
            s = sub
            for x in reversed(xs):
                s = f"({x},{s})"
            return s + ";"
        ts = (parse_tree(cat(a)), parse_tree(cat(b)))
        chain = max_common_chain(ts)
        assert chain.leaves == tuple(xs)
        assert chain.q == 0

    @given(trees(min_leaves=3, max_leaves=7), st.integers(0, 2**32 - 1))
    def test_verify_chain_matches_cluster_oracle(self, t, seed):
        rng = random.Random(seed)
        labels = sorted(t.leaves)
        for _ in range(20):
            seq = tuple(rng.sample(labels, rng.randint(2, len(labels))))
            assert verify_chain(seq, t) == chain_oracle(seq, t)
        # and on every actual sibling path: walk the caterpillars that exist
        for x in labels:
            for y in labels:
                if x != y:
                    assert verify_chain((x, y), t) == chain_oracle((x, y), t)

    @given(instances(max_leaves=8, max_trees=3))
    def test_chain_properties(self, inst):
        inst = reduce_subtrees(inst)
        assume(inst.n >= 3)
        for q in range(inst.t):
            chain = max_q_star_chain(inst, q)
            if chain is None:
                continue
            seq = chain.leaves
            stars = 0
            for t in inst:
                assert chain_oracle(seq, t)[0]
                stars += len({parent_cluster(t, x) for x in seq}) == 1
                # common-parent interval property
                for i, j in itertools.combinations(range(len(seq)), 2):
                    if parent_cluster(t, seq[i]) == parent_cluster(t, seq[j]):
                        assert all(parent_cluster(t, seq[m]) == parent_cluster(t, seq[i])
                                   for m in range(i, j + 1))
            assert stars == q
            # subchain closure
            for i in range(len(seq)):
                for j in range(i + 2, len(seq) + 1):
                    assert all(chain_oracle(seq[i:j], t)[0] for t in inst)
            # maximality: no single-leaf insertion yields a longer q-star chain
            for x in sorted(inst.labels - set(seq)):
                for pos in range(len(seq) + 1):
                    longer = seq[:pos] + (x,) + seq[pos:]
                    if all(chain_oracle(longer, t)[0] for t in inst):
                        star = sum(len({parent_cluster(t, y) for y in longer}) == 1 for t in inst)
                        assert star != q

    @given(instances(min_leaves=3, max_leaves=6, max_trees=3))
    def test_maximum_against_exhaustive_search(self, inst):
        inst = reduce_subtrees(inst)
        assume(inst.n >= 3)
        labels = sorted(inst.labels)
        best: dict[int, int] = {}
        for size in range(2, len(labels) + 1):
            for seq in itertools.permutations(labels, size):
                if all(chain_oracle(seq, t)[0] for t in inst):
                    q = sum(len({parent_cluster(t, y) for y in seq}) == 1 for t in inst)
                    best[q] = max(best.get(q, 0), size)
        chains = common_chains(inst)
        for q in range(inst.t):
            found = max_q_star_chain(inst, q, chains)
            assert (found.p if found else 0) == best.get(q, 0)
