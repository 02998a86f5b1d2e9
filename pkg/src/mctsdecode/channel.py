"""BPSK over AWGN: frames, LLRs, distances and reliability helpers.

Gaussian noise comes from numpy's ``Generator.standard_normal`` (ziggurat)
on a PCG64 stream, which is seed-stable on a given platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gf2 import LinearCode, as_bits, encode


def make_rng(seed: int, worker: int | None = None) -> np.random.Generator:
    """PCG64 stream; ``worker`` selects a disjoint sub-stream of ``seed``."""
    entropy = [int(seed)] if worker is None else [int(seed), int(worker)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def snr_to_sigma(snr_db: float) -> float:
    """Noise standard deviation for a per-symbol SNR of ``10 log10(1/sigma^2)``."""
    return float(np.sqrt(10.0 ** (-snr_db / 10.0)))


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    codeword: np.ndarray
    symbols: np.ndarray
    received: np.ndarray
    llr: np.ndarray
    sigma: float
    snr_db: float

    @property
    def n(self) -> int:
        return self.codeword.size


def frame_from_received(codeword, received, snr_db: float, sigma: float | None = None) -> ReceivedFrame:
    codeword = as_bits(codeword)
    received = np.asarray(received, dtype=np.float64).reshape(-1)
    if received.size != codeword.size:
        raise ValueError("received length does not match codeword length")
    if sigma is None:
        sigma = snr_to_sigma(snr_db)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    symbols = 1.0 - 2.0 * codeword.astype(np.float64)
    llr = 2.0 * received / sigma**2
    return ReceivedFrame(codeword, symbols, received, llr, float(sigma), float(snr_db))


def simulate(code: LinearCode, message, snr_db: float, rng: np.random.Generator,
             noise=None) -> ReceivedFrame:
    """Transmit ``encode(message)`` over AWGN.

    ``noise`` overrides the sampled noise vector (test hook).
    """
    codeword = encode(code, message)
    sigma = snr_to_sigma(snr_db)
    if noise is None:
        noise = sigma * rng.standard_normal(code.n)
    else:
        noise = np.asarray(noise, dtype=np.float64).reshape(code.n)
    received = (1.0 - 2.0 * codeword) + noise
    return frame_from_received(codeword, received, snr_db, sigma)


def frame_stream(code: LinearCode, snr_db: float, count: int, seed: int,
                 worker: int | None = None, random_messages: bool = False):
    """Yield ``count`` frames; a pure function of its arguments.

    The all-zero message is sent unless ``random_messages`` is set.
    """
    rng = make_rng(seed, worker)
    zero = np.zeros(code.k, dtype=np.uint8)
    for _ in range(count):
        msg = rng.integers(0, 2, code.k, dtype=np.uint8) if random_messages else zero
        yield simulate(code, msg, snr_db, rng)


def hard_decision(r) -> np.ndarray:
    """Bit 0 where ``r > 0`` or ``r == 0``, bit 1 where ``r < 0``."""
    return (np.asarray(r, dtype=np.float64) < 0).astype(np.uint8)


def euclidean_distance(c, r) -> float:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    if c.size != r.size:
        raise ValueError(f"length mismatch: {c.size} bits vs {r.size} samples")
    return float(np.sqrt(np.sum((r - (1.0 - 2.0 * c)) ** 2)))


def normalize_llr(llr) -> np.ndarray:
    """Standardize with the frame's sample mean and sample std (ddof=1).

    A constant frame maps to all zeros.
    """
    llr = np.asarray(llr, dtype=np.float64).reshape(-1)
    if llr.size < 2:
        raise ValueError("need at least two LLRs to normalize")
    std = llr.std(ddof=1)
    if std == 0.0:
        return np.zeros_like(llr)
    return (llr - llr.mean()) / std


class PackedWeights:
    """Sum of per-position weights over the set bits of a packed word.

    ``value(w) = base + sum(weights[j] for bit j set in w)``, evaluated with
    one 256-entry table per byte. The scalar and vectorized paths perform
    identical float additions in identical order, so they agree bit for bit.
    """

    def __init__(self, weights, base: float = 0.0):
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        self.n = weights.size
        nbytes = (self.n + 7) // 8
        padded = np.zeros(nbytes * 8)
        padded[:self.n] = weights
        bits = ((np.arange(256)[:, None] >> np.arange(8)) & 1).astype(np.float64)
        self.table = np.empty((nbytes, 256))
        for j in range(nbytes):
            # Sequential accumulation keeps table entries independent of BLAS.
            acc = np.zeros(256)
            for t in range(8):
                acc = acc + bits[:, t] * padded[8 * j + t]
            self.table[j] = acc
        self._rows = [row.tolist() for row in self.table]
        self.base = float(base)

    def value(self, word: int) -> float:
        acc = self.base
        for row in self._rows:
            acc += row[word & 0xFF]
            word >>= 8
        return acc

    def values(self, words) -> np.ndarray:
        words = np.asarray(words, dtype=np.uint64)
        acc = np.full(words.shape, self.base)
        for j, row in enumerate(self.table):
            acc = acc + row[((words >> np.uint64(8 * j)) & np.uint64(0xFF)).astype(np.intp)]
        return acc


def squared_distance_metric(r) -> PackedWeights:
    """``||r - (1 - 2c)||^2`` as a function of the packed codeword ``c``."""
    r = np.asarray(r, dtype=np.float64)
    return PackedWeights(4.0 * r, float(np.sum((r - 1.0) ** 2)))


# ---------------------------------------------------------------------------
# Frame dump files
# ---------------------------------------------------------------------------

def save_frame(frame: ReceivedFrame, path) -> None:
    lines = [
        f"{frame.snr_db!r} {frame.sigma!r}",
        " ".join(str(int(b)) for b in frame.codeword),
        " ".join(f"{v:.17g}" for v in frame.received),
        " ".join(f"{v:.17g}" for v in frame.llr),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_frame(path) -> ReceivedFrame:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ValueError(f"{path}: frame file needs header, codeword and received lines")
    snr_db, sigma = (float(t) for t in lines[0].split())
    codeword = np.array([int(t) for t in lines[1].split()], dtype=np.uint8)
    received = np.array([float(t) for t in lines[2].split()])
    return frame_from_received(codeword, received, snr_db, sigma)
