"""The deterministic binary tree of test error patterns (TEPs).

A TEP is a tuple of strictly increasing 1-based positions in ``[1, k]``;
``()`` is the all-zero pattern at the root. From ``(z_1, ..., z_l)`` the
*extended* child appends ``k`` and the *adjacent* child decrements ``z_l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

EXTEND = 0
ADJACENT = 1
ACTION_NAMES = ("extend", "adjacent")

Tep = tuple


@dataclass(frozen=True)
class TreeParams:
    k: int
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= self.k:
            raise ValueError(f"need 1 <= m <= k, got k={self.k}, m={self.m}")


def validate_tep(tep, p: TreeParams) -> Tep:
    tep = tuple(int(z) for z in tep)
    if len(tep) > p.m:
        raise ValueError(f"TEP {tep} has weight above m={p.m}")
    prev = 0
    for z in tep:
        if z <= prev or z > p.k:
            raise ValueError(f"TEP {tep} is not strictly increasing within [1, {p.k}]")
        prev = z
    return tep


def extended_child(tep: Tep, p: TreeParams) -> Tep | None:
    if not tep:
        return (p.k,)
    if tep[-1] != p.k and len(tep) < p.m:
        return tep + (p.k,)
    return None


def adjacent_child(tep: Tep) -> Tep | None:
    if not tep:
        return None
    z = tep[-1] - 1
    floor = tep[-2] if len(tep) > 1 else 0
    if z > floor:
        return tep[:-1] + (z,)
    return None


def children(tep, p: TreeParams) -> tuple[Tep | None, Tep | None]:
    """``(extended, adjacent)``; ``None`` where the child does not exist."""
    tep = validate_tep(tep, p)
    return extended_child(tep, p), adjacent_child(tep)


def legal_actions(tep: Tep, p: TreeParams) -> tuple[bool, bool]:
    if not tep:
        return True, False
    last = tep[-1]
    floor = tep[-2] if len(tep) > 1 else 0
    return (last != p.k and len(tep) < p.m), (last - 1 > floor)


def apply_action(tep: Tep, action: int, k: int) -> Tep:
    if action == EXTEND:
        return tep + (k,)
    return tep[:-1] + (tep[-1] - 1,)


def reachable(source, target, k: int | None = None, strict: bool = False) -> bool:
    """Whether ``target`` lies in the subtree rooted at ``source``.

    With ``strict=True`` the equal-last-index case (``source`` a proper
    prefix of ``target`` through extension) is rejected, as in the bare
    three-condition rule; that variant misses e.g. ``(3, 4) -> (3, 4, 5)``.
    """
    source, target = tuple(source), tuple(target)
    if k is not None:
        for tep in (source, target):
            if any(z < 1 or z > k for z in tep):
                raise ValueError(f"TEP {tep} has positions outside [1, {k}]")
    if source == target or not source:
        return True
    ell = len(source)
    if ell > len(target) or source[:-1] != target[:ell - 1]:
        return False
    last, goal = source[-1], target[ell - 1]
    if last > goal:
        return True
    return not strict and last == goal and ell < len(target)


def enumerate_all(p: TreeParams) -> list[Tep]:
    """Preorder walk, extended child before adjacent child."""
    out = []
    stack = [()]
    while stack:
        tep = stack.pop()
        out.append(tep)
        ext = extended_child(tep, p)
        adj = adjacent_child(tep)
        if adj is not None:
            stack.append(adj)
        if ext is not None:
            stack.append(ext)
    return out


def tree_size(k: int, m: int) -> int:
    return sum(comb(k, i) for i in range(m + 1))


def depth_of(tep, p: TreeParams) -> int:
    """Edges from the root: one extension plus ``k - z`` decrements per index."""
    tep = validate_tep(tep, p)
    return sum(1 + p.k - z for z in tep)


def max_depth(p: TreeParams) -> int:
    return p.m * (2 * p.k - p.m + 1) // 2


def tep_to_bits(tep, k: int) -> np.ndarray:
    bits = np.zeros(k, dtype=np.uint8)
    for z in tep:
        if not 1 <= z <= k:
            raise ValueError(f"position {z} outside [1, {k}]")
        bits[z - 1] = 1
    return bits


def bits_to_tep(bits) -> Tep:
    return tuple(int(i) + 1 for i in np.flatnonzero(np.asarray(bits)))


def tep_string(tep, k: int) -> str:
    return "".join(str(b) for b in tep_to_bits(tep, k))


def tep_mask(tep) -> int:
    out = 0
    for z in tep:
        out |= 1 << (z - 1)
    return out


class FullTree:
    """The whole tree for ``(k, m)`` stored as index-addressed arrays.

    Node 0 is the root; nodes are numbered in preorder. ``child[i, a]`` is
    the node reached by action ``a`` or ``-1``.
    """

    def __init__(self, p: TreeParams):
        self.params = p
        teps = enumerate_all(p)
        self.teps = teps
        index = {tep: i for i, tep in enumerate(teps)}
        size = len(teps)
        self.child = np.full((size, 2), -1, dtype=np.int64)
        self.parent = np.full(size, -1, dtype=np.int64)
        self.action = np.full(size, -1, dtype=np.int64)
        for i, tep in enumerate(teps):
            for a, c in enumerate((extended_child(tep, p), adjacent_child(tep))):
                if c is not None:
                    j = index[c]
                    self.child[i, a] = j
                    self.parent[j] = i
                    self.action[j] = a
        self.masks = [tep_mask(t) for t in teps]
        self._child_lists = self.child.tolist()

    def __len__(self):
        return len(self.teps)

    def xor_offsets(self, rows) -> list[int]:
        """Per node, the XOR of ``rows[z - 1]`` over the TEP's positions."""
        offsets = [0] * len(self.teps)
        for i, tep in enumerate(self.teps):
            if i:
                offsets[i] = offsets[self.parent[i]] ^ _delta(self.teps[self.parent[i]], tep, rows)
        return offsets

    def depth(self) -> np.ndarray:
        depth = np.zeros(len(self.teps), dtype=np.int64)
        for i in range(1, len(self.teps)):
            depth[i] = depth[self.parent[i]] + 1
        return depth


def _delta(parent: Tep, child: Tep, rows) -> int:
    if len(child) > len(parent):
        return rows[child[-1] - 1]
    return rows[parent[-1] - 1] ^ rows[child[-1] - 1]


def inspect_lines(p: TreeParams) -> list[str]:
    """``depth bits parent-bits action`` per node, preorder."""
    tree = FullTree(p)
    depth = tree.depth()
    lines = []
    for i, tep in enumerate(tree.teps):
        if i == 0:
            parent, action = "-", "-"
        else:
            parent = tep_string(tree.teps[tree.parent[i]], p.k)
            action = ACTION_NAMES[tree.action[i]]
        lines.append(f"{depth[i]} {tep_string(tep, p.k)} {parent} {action}")
    return lines


def search_costs(n: int, k: int, m: int, hidden_layers: int = 3, units: int = 128) -> dict[str, int]:
    """Worst-case search and per-operation costs of the three decoders."""
    d_in = k + k * n + 2 * n + 1
    return {
        "osd_worst_teps": tree_size(k, m),
        "tree_max_depth": max_depth(TreeParams(k, m)),
        "encode_flops": k * (n - k),
        "ge_flops": n * min(k, n - k) ** 2,
        "nn_flops": d_in * units + (hidden_layers - 1) * units**2 + units * 2,
    }
