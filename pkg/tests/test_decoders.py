from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mctsdecode.channel import euclidean_distance, frame_stream, hard_decision, make_rng, simulate
from mctsdecode.decoders import (
    STOP_BUDGET, STOP_EXHAUSTED, STOP_RULE, StoppingRule, ascending_teps, decode, mcts_decode,
    mld_exhaustive, non_ge_osd_decode, osd_decode, stopping_check, success_probability,
)
from mctsdecode.gf2 import FeasibilityError, LinearCode
from mctsdecode.policy import init_model
from mctsdecode.teptree import TreeParams, enumerate_all

from conftest import brute_mld

received = st.lists(st.floats(-3, 3, allow_nan=False), min_size=7, max_size=7)


def test_ascending_order():
    teps = ascending_teps(4, 2)
    rows = [tuple(int(z) for z in row if z < 4) for row in teps]
    assert rows == [(), (0,), (1,), (2,), (3,), (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_noiseless_frames(ebch):
    frame = simulate(ebch, make_rng(0).integers(0, 2, 16), 3.0, make_rng(0), noise=np.zeros(32))
    for out in (osd_decode(ebch, frame.received, 0), non_ge_osd_decode(ebch, frame.received, 3)):
        assert np.array_equal(out.codeword, frame.codeword)
    assert osd_decode(ebch, frame.received, 0).teps_visited == 1
    assert np.array_equal(mld_exhaustive(ebch, frame.received), frame.codeword)
    first = non_ge_osd_decode(ebch, frame.received, 3, StoppingRule.perfect(frame.codeword))
    assert first.teps_visited == 1 and first.stop_reason == STOP_RULE


def test_osd_full_count(ebch):
    r = next(frame_stream(ebch, 1.0, 1, seed=2)).received
    out = osd_decode(ebch, r, 3)
    assert out.teps_visited == 697 and out.stop_reason == STOP_EXHAUSTED


@settings(max_examples=60, deadline=None)
@given(received)
def test_full_order_equals_mld(hamming, r):
    r = np.array(r)
    best = brute_mld(hamming, r)
    d = euclidean_distance(best, r)
    for out in (non_ge_osd_decode(hamming, r, 4), osd_decode(hamming, r, 4),
                mcts_decode(hamming, r, 4, None)):
        assert out.distance == pytest.approx(d, abs=1e-12)
    assert euclidean_distance(mld_exhaustive(hamming, r), r) == pytest.approx(d, abs=1e-12)


def test_mld_tie_break_smallest_message(hamming):
    # r = 0 makes every codeword equally distant: the all-zero message wins
    assert not mld_exhaustive(hamming, np.zeros(7)).any()


def test_mld_refuses_large_k():
    big = LinearCode(np.hstack([np.eye(25, dtype=np.uint8), np.ones((25, 1), dtype=np.uint8)]))
    with pytest.raises(FeasibilityError):
        mld_exhaustive(big, np.ones(26))


def test_osd_candidates_are_codewords(ebch):
    rng = make_rng(4)
    h = ebch.parity_check.astype(int)
    for frame in frame_stream(ebch, 0.0, 20, seed=8, random_messages=True):
        out = osd_decode(ebch, frame.received, 2, budget=int(rng.integers(1, 137)))
        assert not ((out.codeword.astype(int) @ h.T) % 2).any()
        assert out.distance == euclidean_distance(out.codeword, frame.received)


def test_non_ge_visits_more_than_osd(ebch):
    frames = list(frame_stream(ebch, 1.0, 60, seed=5, random_messages=True))
    osd, nge = [], []
    for f in frames:
        oracle = StoppingRule.perfect(mld_exhaustive(ebch, f.received))
        osd.append(osd_decode(ebch, f.received, 4, oracle).teps_visited)
        nge.append(non_ge_osd_decode(ebch, f.received, 4, oracle).teps_visited)
    assert np.mean(nge) >= np.mean(osd)


def test_budget_semantics(ebch):
    r = next(frame_stream(ebch, 0.5, 1, seed=9)).received
    for fn in (osd_decode, non_ge_osd_decode):
        out = fn(ebch, r, 3, budget=50)
        assert out.teps_visited == 50 and out.stop_reason == STOP_BUDGET
    out = mcts_decode(ebch, r, 3, None, budget=50)
    assert out.teps_visited == 50 and out.stop_reason == STOP_BUDGET
    with pytest.raises(ValueError):
        mcts_decode(ebch, r, 3, None, budget=0)
    with pytest.raises(ValueError):
        osd_decode(ebch, r, 17)


def test_mcts_visits_whole_tree_once(hamming):
    r = np.array([0.2, -0.1, 0.9, -0.4, 0.3, 0.05, -1.0])
    model = init_model(4, 7, 1, seed=3, units=8)
    out = mcts_decode(hamming, r, 2, model)
    assert out.teps_visited == 1 + 4 + 6 and out.stop_reason == STOP_EXHAUSTED
    assert len(enumerate_all(TreeParams(4, 2))) == 11


def test_mcts_matches_non_ge_distance(ebch):
    model = init_model(16, 32, 3, seed=1)
    for f in frame_stream(ebch, 2.0, 10, seed=31, random_messages=True):
        a = mcts_decode(ebch, f.received, 3, model)
        b = non_ge_osd_decode(ebch, f.received, 3)
        assert a.distance == b.distance
        assert a.teps_visited == b.teps_visited == sum(comb(16, i) for i in range(4))


def test_mcts_perfect_stop_at_root(ebch):
    f = next(frame_stream(ebch, 2.0, 1, seed=3))
    root = (hard_decision(f.received[:16]).astype(int) @ ebch.generator.astype(int)) % 2
    out = mcts_decode(ebch, f.received, 5, None, stop=StoppingRule.perfect(root))
    assert out.teps_visited == 1 and out.stop_reason == STOP_RULE


def test_incumbent_monotone_with_budget(ebch):
    f = next(frame_stream(ebch, 0.0, 1, seed=12, random_messages=True))
    model = init_model(16, 32, 3, seed=0)
    for fn in (lambda b: osd_decode(ebch, f.received, 3, budget=b),
               lambda b: non_ge_osd_decode(ebch, f.received, 3, budget=b),
               lambda b: mcts_decode(ebch, f.received, 3, model, budget=b)):
        dists = [fn(b).distance for b in range(1, 700, 37)]
        assert all(x >= y for x, y in zip(dists, dists[1:]))


def test_stopping_rule_validation():
    with pytest.raises(ValueError):
        StoppingRule.probability(1.0 + 1e-9)
    with pytest.raises(ValueError):
        StoppingRule("perfect")
    with pytest.raises(ValueError):
        StoppingRule("crc")


def test_stopping_check_variants():
    r = np.array([1.0, -0.5, 0.2, -2.0])
    llr = 2 * r / 0.5
    hard = hard_decision(r)
    assert not stopping_check(StoppingRule.none(), hard, r, llr)
    assert stopping_check(StoppingRule.perfect(hard), hard, r)
    assert success_probability(hard, r, llr) == 1.0
    assert stopping_check(StoppingRule.probability(), hard, r, llr)
    flip_weak = hard.copy()
    flip_weak[2] ^= 1
    flip_strong = hard.copy()
    flip_strong[3] ^= 1
    assert success_probability(flip_weak, r, llr) > success_probability(flip_strong, r, llr)
    with pytest.raises(ValueError):
        stopping_check(StoppingRule.probability(), hard, r)


def test_success_probability_equals_crossover_product():
    rng = make_rng(2)
    llr = rng.normal(0, 3, 12)
    r = llr / 4
    cand = rng.integers(0, 2, 12).astype(np.uint8)
    q = 1 / (1 + np.exp(np.abs(llr)))
    d = cand ^ hard_decision(r)
    direct = np.prod(np.where(d == 1, q, 1 - q)) / np.prod(1 - q)
    # each flipped factor q/(1-q) equals exp(-|l|)
    assert success_probability(cand, r, llr) == pytest.approx(direct, rel=1e-12)


def test_probability_stop_returns_firing_candidate(ebch):
    for f in frame_stream(ebch, 4.0, 30, seed=17, random_messages=True):
        for name in ("osd", "non-ge-osd", "mcts"):
            out = decode(name, ebch, f.received, 3, StoppingRule.probability(0.5), f.llr)
            if out.stop_reason == STOP_RULE:
                assert stopping_check(StoppingRule.probability(0.5), out.codeword, f.received, f.llr)


def test_decode_dispatch(ebch):
    f = next(frame_stream(ebch, 3.0, 1, seed=1))
    assert decode("mld", ebch, f.received, 0).teps_visited == 2 ** 16
    with pytest.raises(ValueError):
        decode("bp", ebch, f.received, 1)
