import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mctsdecode.channel import (
    PackedWeights, euclidean_distance, frame_stream, hard_decision, load_frame, make_rng,
    normalize_llr, save_frame, simulate, snr_to_sigma, squared_distance_metric,
)
from mctsdecode.gf2 import pack_bits


def test_sigma_from_snr():
    assert snr_to_sigma(0.0) == pytest.approx(1.0)
    assert snr_to_sigma(10.0) == pytest.approx(np.sqrt(0.1))


def test_hard_decision_ties_go_to_zero():
    assert list(hard_decision([0.5, -0.1, 0.0, -0.0])) == [0, 1, 0, 0]


def test_noiseless_frame(hamming):
    msg = [1, 0, 1, 1]
    frame = simulate(hamming, msg, 3.0, make_rng(0), noise=np.zeros(7))
    assert np.array_equal(frame.symbols, 1 - 2 * frame.codeword.astype(float))
    assert np.array_equal(hard_decision(frame.received), frame.codeword)
    assert np.allclose(frame.llr, 2 * frame.received / frame.sigma ** 2)
    assert euclidean_distance(frame.codeword, frame.received) == 0.0


def test_noise_variance(hamming):
    sigma = snr_to_sigma(1.0)
    r = np.concatenate([f.received for f in frame_stream(hamming, 1.0, 4000, seed=3)])
    assert np.std(r - 1.0) == pytest.approx(sigma, rel=0.03)


def test_stream_is_reproducible(hamming):
    a = [f.received for f in frame_stream(hamming, 2.0, 5, seed=11, worker=2)]
    b = [f.received for f in frame_stream(hamming, 2.0, 5, seed=11, worker=2)]
    c = [f.received for f in frame_stream(hamming, 2.0, 5, seed=11, worker=3)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_distance_length_mismatch():
    with pytest.raises(ValueError):
        euclidean_distance([0, 1], [0.1, 0.2, 0.3])


def test_normalize_llr():
    z = normalize_llr([1.0, 2.0, 3.0, 4.0])
    assert z.mean() == pytest.approx(0.0)
    assert z.std(ddof=1) == pytest.approx(1.0)
    assert not normalize_llr([2.0, 2.0, 2.0]).any()
    # scale invariance lets the decoder normalize r instead of the LLRs
    r = np.array([0.3, -1.2, 0.8, 2.0])
    assert np.allclose(normalize_llr(r), normalize_llr(2 * r / 0.7 ** 2))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=1, max_size=40), st.integers(0, 2 ** 40))
def test_packed_metric_matches_direct(r, word_seed):
    r = np.array(r)
    n = r.size
    word = word_seed % (1 << n)
    bits = np.array([(word >> j) & 1 for j in range(n)])
    metric = squared_distance_metric(r)
    assert metric.value(word) == pytest.approx(euclidean_distance(bits, r) ** 2, abs=1e-9)
    assert metric.values(np.array([word], dtype=np.uint64))[0] == metric.value(word)


def test_packed_weights_scalar_vector_identical():
    rng = make_rng(5)
    w = PackedWeights(rng.standard_normal(29), 1.5)
    words = rng.integers(0, 1 << 29, 200).astype(np.uint64)
    assert [w.value(int(x)) for x in words] == list(w.values(words))


def test_frame_file_roundtrip(tmp_path, ebch):
    frame = simulate(ebch, np.ones(16, dtype=np.uint8), 1.5, make_rng(4))
    path = tmp_path / "frame.txt"
    save_frame(frame, path)
    back = load_frame(path)
    assert np.array_equal(back.received, frame.received)
    assert np.array_equal(back.codeword, frame.codeword)
    assert back.sigma == frame.sigma and back.snr_db == frame.snr_db
    assert pack_bits(back.codeword) == pack_bits(frame.codeword)
