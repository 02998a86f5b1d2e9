from collections import deque
from math import comb

import pytest
from hypothesis import given, strategies as st

from mctsdecode.teptree import (
    ADJACENT, EXTEND, FullTree, TreeParams, bits_to_tep, children, depth_of, enumerate_all,
    inspect_lines, legal_actions, max_depth, reachable, search_costs, tep_string, tep_to_bits,
    tree_size, validate_tep,
)


def bfs_descendants(p, source):
    seen = {source}
    queue = deque([source])
    while queue:
        for c in children(queue.popleft(), p):
            if c is not None and c not in seen:
                seen.add(c)
                queue.append(c)
    return seen


def test_children_examples():
    p = TreeParams(5, 3)
    assert children((), p) == ((5,), None)
    assert children((5,), p) == (None, (4,))
    assert children((3,), p) == ((3, 5), (2,))
    assert children((1,), p) == ((1, 5), None)
    assert children((2, 3), p) == ((2, 3, 5), None)
    assert children((3, 4, 5), p) == (None, None)


def test_enumeration_small():
    p = TreeParams(5, 3)
    teps = enumerate_all(p)
    assert len(teps) == 26 == len(set(teps)) == tree_size(5, 3)
    assert teps[:4] == [(), (5,), (4,), (4, 5)]


@pytest.mark.parametrize("k,m", [(5, 1), (5, 5), (8, 2), (8, 3), (16, 3), (10, 4)])
def test_enumeration_covers_every_low_weight_pattern(k, m):
    teps = enumerate_all(TreeParams(k, m))
    assert len(teps) == sum(comb(k, i) for i in range(m + 1))
    assert len(set(teps)) == len(teps)
    assert all(len(t) <= m and list(t) == sorted(set(t)) for t in teps)


def test_depths():
    assert max_depth(TreeParams(16, 3)) == 45
    assert max_depth(TreeParams(16, 5)) == 70
    assert max_depth(TreeParams(24, 6)) == 129
    assert depth_of((3, 4, 5), TreeParams(5, 3)) == 6


@pytest.mark.parametrize("k,m", [(5, 3), (8, 2), (8, 3), (7, 7)])
def test_depth_formula_matches_tree(k, m):
    tree = FullTree(TreeParams(k, m))
    depth = tree.depth()
    p = TreeParams(k, m)
    assert all(depth[i] == depth_of(t, p) for i, t in enumerate(tree.teps))
    assert depth.max() == max_depth(p)


@pytest.mark.parametrize("k,m", [(5, 3), (8, 2), (8, 3)])
def test_reachable_matches_bfs(k, m):
    p = TreeParams(k, m)
    teps = enumerate_all(p)
    for s in teps:
        below = bfs_descendants(p, s)
        for t in teps:
            assert reachable(s, t) == (t in below), (s, t)


def test_strict_reachability_misses_extension_prefix():
    assert reachable((3, 4), (3, 4, 5))
    assert not reachable((3, 4), (3, 4, 5), strict=True)
    assert reachable((4,), (3, 5), strict=True)


def test_reachable_rejects_out_of_range():
    with pytest.raises(ValueError):
        reachable((0,), (1,), k=5)


def test_validate_tep():
    p = TreeParams(5, 2)
    assert validate_tep([1, 4], p) == (1, 4)
    for bad in ((2, 2), (4, 1), (6,), (1, 2, 3)):
        with pytest.raises(ValueError):
            validate_tep(bad, p)
    with pytest.raises(ValueError):
        TreeParams(3, 4)


@given(st.integers(2, 12).flatmap(lambda k: st.tuples(st.just(k), st.integers(1, k))))
def test_legal_actions_agree_with_children(km):
    k, m = km
    p = TreeParams(k, m)
    for tep in enumerate_all(p)[:200]:
        ext, adj = children(tep, p)
        assert legal_actions(tep, p) == (ext is not None, adj is not None)


def test_full_tree_arrays():
    tree = FullTree(TreeParams(5, 3))
    assert len(tree) == 26
    for i, tep in enumerate(tree.teps):
        for a in (EXTEND, ADJACENT):
            j = tree.child[i, a]
            if j >= 0:
                assert tree.parent[j] == i and tree.action[j] == a
    rows = [1 << i for i in range(5)]
    offs = tree.xor_offsets(rows)
    assert all(offs[i] == sum(1 << (z - 1) for z in t) for i, t in enumerate(tree.teps))


def test_bits_roundtrip():
    assert tep_string((1, 3), 4) == "1010"
    assert bits_to_tep(tep_to_bits((2, 5), 6)) == (2, 5)


def test_inspect_lines():
    lines = inspect_lines(TreeParams(5, 3))
    assert len(lines) == 26
    assert lines[0] == "0 00000 - -"
    assert lines[1] == "1 00001 00000 extend"
    assert lines[2] == "2 00010 00001 adjacent"


def test_search_costs():
    c = search_costs(32, 16, 3)
    assert c["osd_worst_teps"] == 697
    assert c["tree_max_depth"] == 45
    assert c["nn_flops"] == 593 * 128 + 2 * 128 ** 2 + 256
