"""Standard OSD, non-GE OSD, policy-guided tree decoding and exhaustive MLD.

All decoders take the received real vector ``r``. The LLR vector is only
needed by the probability stopping rule; the policy input is built from
normalized LLRs, which are invariant to the ``2/sigma^2`` scale and are
therefore computed from ``r`` directly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb, exp, sqrt

import numpy as np

from .channel import PackedWeights, euclidean_distance, hard_decision, normalize_llr, squared_distance_metric
from .gf2 import (LinearCode, codebook_packed, encode_packed, gf2_systematize, pack_bits,
                  pack_rows, unpack_bits)
from .policy import FramePolicy, PolicyModel, candidate_tables
from .teptree import FullTree, TreeParams, tree_size

STOP_RULE = "stopping-rule"
STOP_BUDGET = "budget"
STOP_EXHAUSTED = "tree-exhausted"

_CHUNK = 512


@dataclass(frozen=True)
class StoppingRule:
    """``none``, ``perfect`` (needs ``oracle`` codeword) or ``probability``."""

    kind: str = "none"
    oracle: tuple | None = None
    tau: float = 0.9

    def __post_init__(self):
        if self.kind not in ("none", "perfect", "probability"):
            raise ValueError(f"unknown stopping rule {self.kind!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.kind == "perfect":
            if self.oracle is None:
                raise ValueError("perfect stopping needs an oracle codeword")
            object.__setattr__(self, "oracle", tuple(int(b) for b in self.oracle))

    @classmethod
    def none(cls) -> StoppingRule:
        return cls("none")

    @classmethod
    def perfect(cls, oracle) -> StoppingRule:
        return cls("perfect", tuple(int(b) for b in np.asarray(oracle).reshape(-1)))

    @classmethod
    def probability(cls, tau: float = 0.9) -> StoppingRule:
        return cls("probability", tau=tau)


@dataclass
class DecodeOutcome:
    codeword: np.ndarray
    distance: float
    teps_visited: int
    stop_reason: str
    wall_time: float = 0.0


def success_probability(candidate, r, llr) -> float:
    """Normalized crossover product for the flips from the hard decision.

    With ``q_i = 1 / (1 + exp|l_i|)`` and the product over all positions
    divided by its zero-flip value, this is ``exp(-sum |l_i|)`` over the
    positions where the candidate disagrees with ``hard_decision(r)``.
    """
    candidate = np.asarray(candidate, dtype=np.uint8).reshape(-1)
    diff = candidate ^ hard_decision(r)
    return float(np.exp(-np.sum(np.abs(np.asarray(llr, dtype=np.float64))[diff == 1])))


def stopping_check(rule: StoppingRule, candidate, r, llr=None) -> bool:
    candidate = np.asarray(candidate, dtype=np.uint8).reshape(-1)
    if candidate.size != np.asarray(r).size:
        raise ValueError("candidate and received vector differ in length")
    if rule.kind == "none":
        return False
    if rule.kind == "perfect":
        return tuple(int(b) for b in candidate) == rule.oracle
    if llr is None:
        raise ValueError("probability stopping needs the LLR vector")
    return success_probability(candidate, r, llr) >= rule.tau


class _Stopper:
    """Packed-word form of a stopping rule for one frame (scalar and vector)."""

    def __init__(self, rule: StoppingRule, r, llr, perm=None):
        self.kind = rule.kind
        self.tau = rule.tau
        if rule.kind == "perfect":
            oracle = np.array(rule.oracle, dtype=np.uint8)
            if perm is not None:
                oracle = oracle[perm]
            self.oracle = pack_bits(oracle)
        elif rule.kind == "probability":
            if llr is None:
                raise ValueError("probability stopping needs the LLR vector")
            r = np.asarray(r)
            llr = np.asarray(llr, dtype=np.float64)
            if perm is not None:
                r, llr = r[perm], llr[perm]
            self.hard = pack_bits(hard_decision(r))
            self.flip_cost = PackedWeights(np.abs(llr))

    def fires(self, word: int) -> bool:
        if self.kind == "none":
            return False
        if self.kind == "perfect":
            return word == self.oracle
        return exp(-self.flip_cost.value(word ^ self.hard)) >= self.tau

    def fires_many(self, words: np.ndarray) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(words.shape, dtype=bool)
        if self.kind == "perfect":
            return words == np.uint64(self.oracle)
        return np.exp(-self.flip_cost.values(words ^ np.uint64(self.hard))) >= self.tau


@lru_cache(maxsize=16)
def ascending_teps(k: int, m: int) -> np.ndarray:
    """TEP position matrix (0-based), ascending weight then lexicographic.

    Rows are padded with ``k``, which indexes an all-zero sentinel row.
    """
    out = np.full((tree_size(k, m), max(m, 1)), k, dtype=np.intp)
    row = 0
    for w in range(1, m + 1):
        block = np.array(list(combinations(range(k), w)), dtype=np.intp).reshape(comb(k, w), w)
        out[row + 1:row + 1 + block.shape[0], :w] = block
        row += block.shape[0]
    return out


def _xor_offsets(rows_packed: np.ndarray, teps: np.ndarray) -> np.ndarray:
    table = np.concatenate([np.asarray(rows_packed, dtype=np.uint64), np.zeros(1, dtype=np.uint64)])
    return np.bitwise_xor.reduce(table[teps], axis=1)


@lru_cache(maxsize=16)
def _non_ge_offsets(code: LinearCode, m: int) -> np.ndarray:
    return _xor_offsets(np.array(code.packed_rows, dtype=np.uint64), ascending_teps(code.k, m))


def _ordered_search(word0: int, offsets: np.ndarray, metric: PackedWeights, stopper: _Stopper,
                    budget: int):
    """Scan candidates ``word0 ^ offsets`` in order with early stopping.

    Returns ``(best_word, visited, stopped)``; the incumbent keeps the first
    minimum, as a strict-improvement update would.
    """
    best_word, best_sq = 0, np.inf
    limit = min(budget, offsets.size)
    start = 0
    while start < limit:
        words = np.uint64(word0) ^ offsets[start:min(start + _CHUNK, limit)]
        sq = metric.values(words)
        fire = stopper.fires_many(words)
        stop_at = int(np.argmax(fire)) if fire.any() else None
        seen = sq if stop_at is None else sq[:stop_at + 1]
        j = int(np.argmin(seen))
        if seen[j] < best_sq:
            best_sq, best_word = seen[j], int(words[j])
        if stop_at is not None:
            return best_word, start + stop_at + 1, True
        start += words.size
    return best_word, limit, False


def _finish(word: int, n: int, r, visited: int, stopped: bool, exhausted: bool, t0: float,
            perm=None) -> DecodeOutcome:
    bits = unpack_bits(word, n)
    if perm is not None:
        original = np.empty_like(bits)
        original[perm] = bits
        bits = original
    distance = euclidean_distance(bits, r)
    reason = STOP_RULE if stopped else (STOP_EXHAUSTED if exhausted else STOP_BUDGET)
    return DecodeOutcome(bits, distance, visited, reason, time.perf_counter() - t0)


def _check_order(code: LinearCode, m: int) -> None:
    if not 0 <= m <= code.k:
        raise ValueError(f"order m={m} outside [0, k={code.k}]")


def non_ge_osd_decode(code: LinearCode, r, m: int, stop: StoppingRule | None = None,
                      llr=None, budget: int | None = None) -> DecodeOutcome:
    """Re-encode ``(b0 xor e) G`` with ``b0`` the hard decision of the first ``k`` samples."""
    t0 = time.perf_counter()
    _check_order(code, m)
    stop = stop or StoppingRule.none()
    r = np.asarray(r, dtype=np.float64)
    word0 = encode_packed(code, hard_decision(r[:code.k]))
    offsets = _non_ge_offsets(code, m)
    total = offsets.size
    word, visited, stopped = _ordered_search(word0, offsets, squared_distance_metric(r),
                                             _Stopper(stop, r, llr), budget or total)
    return _finish(word, code.n, r, visited, stopped, visited == total, t0)


def osd_decode(code: LinearCode, r, m: int, stop: StoppingRule | None = None,
               llr=None, budget: int | None = None) -> DecodeOutcome:
    """Order-``m`` OSD over the most reliable basis.

    Columns are sorted by descending ``|r|`` (stable, so ties keep their
    original order; ``|llr|`` is proportional). Dependent columns met during
    elimination are swapped with the next independent one.
    """
    t0 = time.perf_counter()
    _check_order(code, m)
    stop = stop or StoppingRule.none()
    r = np.asarray(r, dtype=np.float64)
    order = np.argsort(-np.abs(r), kind="stable")
    systematic, swap = gf2_systematize(code.generator[:, order])
    perm = order[swap]
    r_perm = r[perm]
    rows = pack_rows(systematic)
    word0 = encode_packed(LinearCode(systematic, code.name), hard_decision(r_perm[:code.k]))
    offsets = _xor_offsets(rows, ascending_teps(code.k, m))
    total = offsets.size
    word, visited, stopped = _ordered_search(word0, offsets, squared_distance_metric(r_perm),
                                             _Stopper(stop, r, llr, perm), budget or total)
    return _finish(word, code.n, r, visited, stopped, visited == total, t0, perm)


@lru_cache(maxsize=4)
def _codebook(code: LinearCode) -> np.ndarray:
    return codebook_packed(code)


def mld_exhaustive(code: LinearCode, r) -> np.ndarray:
    """Minimum-distance codeword over all ``2^k``; ties go to the smallest message."""
    words = _codebook(code)
    r = np.asarray(r, dtype=np.float64)
    sq = squared_distance_metric(r).values(words)
    return unpack_bits(int(words[int(np.argmin(sq))]), code.n)


@lru_cache(maxsize=8)
def full_tree(k: int, m: int) -> FullTree:
    return FullTree(TreeParams(k, m))


@lru_cache(maxsize=8)
def _tree_offsets(code: LinearCode, m: int) -> list[int]:
    return full_tree(code.k, m).xor_offsets(code.packed_rows)


def policy_tables(model: PolicyModel, code: LinearCode):
    """Candidate-block tables for ``model``, cached on the model until it changes."""
    cache = model.__dict__.setdefault("_tables", {})
    key = (id(code), getattr(model, "version", 0))
    if key not in cache:
        cache.clear()
        cache[key] = candidate_tables(model, code)
    return cache[key]


def mcts_decode(code: LinearCode, r, m: int, model: PolicyModel | None, budget: int | None = None,
                stop: StoppingRule | None = None, llr=None, use_generator: bool = True) -> DecodeOutcome:
    """Policy-guided depth-first search over the pre-generated TEP tree.

    At a node with two children the higher-probability child is visited
    first (extend on ties) and the other is kept for backtracking. ``budget``
    counts visited TEPs and defaults to the whole tree. ``model=None``
    always prefers extend.
    """
    t0 = time.perf_counter()
    _check_order(code, m)
    if m == 0:
        return non_ge_osd_decode(code, r, 0, stop, llr)
    stop = stop or StoppingRule.none()
    r = np.asarray(r, dtype=np.float64)
    tree = full_tree(code.k, m)
    offsets = _tree_offsets(code, m)
    budget = len(tree) if budget is None else budget
    if budget < 1:
        raise ValueError("budget must be at least 1")
    metric = squared_distance_metric(r)
    stopper = _Stopper(stop, r, llr)
    policy = None
    if model is not None:
        policy = FramePolicy(model, code, normalize_llr(r), use_generator, policy_tables(model, code))
    word0 = encode_packed(code, hard_decision(r[:code.k]))
    child = tree._child_lists
    teps = tree.teps

    best_word, best_sq = word0, np.inf
    visited = 0
    stack = [0]
    while stack and visited < budget:
        i = stack.pop()
        word = word0 ^ offsets[i]
        sq = metric.value(word)
        visited += 1
        if sq < best_sq:
            best_sq, best_word = sq, word
        if stopper.fires(word):
            return _finish(best_word, code.n, r, visited, True, False, t0)
        ext, adj = child[i]
        if ext >= 0 and adj >= 0:
            gap = policy.logit_gap(teps[i], word, sqrt(max(sq, 0.0))) if policy is not None else 0.0
            if gap >= 0.0:
                stack.append(adj)
                stack.append(ext)
            else:
                stack.append(ext)
                stack.append(adj)
        elif ext >= 0:
            stack.append(ext)
        elif adj >= 0:
            stack.append(adj)
    return _finish(best_word, code.n, r, visited, False, not stack, t0)


DECODERS = ("osd", "non-ge-osd", "mcts", "mld")


def decode(name: str, code: LinearCode, r, m: int, stop: StoppingRule | None = None, llr=None,
           model: PolicyModel | None = None, budget: int | None = None) -> DecodeOutcome:
    if name == "osd":
        return osd_decode(code, r, m, stop, llr, budget)
    if name == "non-ge-osd":
        return non_ge_osd_decode(code, r, m, stop, llr, budget)
    if name == "mcts":
        return mcts_decode(code, r, m, model, budget, stop, llr)
    if name == "mld":
        t0 = time.perf_counter()
        word = pack_bits(mld_exhaustive(code, r))
        return _finish(word, code.n, r, 2**code.k, False, True, t0)
    raise ValueError(f"unknown decoder {name!r}; choose from {DECODERS}")
