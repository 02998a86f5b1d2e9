"""GF(2) linear algebra and construction of the two benchmark codes.

Bit vectors are 1-D ``uint8`` arrays and matrices are 2-D ``uint8`` arrays.
Hot paths also use a packed form: codeword position ``j`` (0-based) is bit
``j`` of a Python int, so re-encoding is a handful of XORs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

# x^5 + x^2 + 1
EBCH_PRIMITIVE_POLY = 0b100101
# x^23 + x^5 + 1, primitive trinomial; 2^23 - 1 = 47 * 178481
QR_FIELD_POLY = (1 << 23) | (1 << 5) | 1

MAX_ENUMERATION_K = 24


class DegenerateMatrixError(ValueError):
    """Raised when a matrix that must have full row rank does not."""


class FeasibilityError(ValueError):
    """Raised when exhaustive enumeration over 2^k words is refused."""


def as_bits(values, length: int | None = None) -> np.ndarray:
    bits = np.asarray(values, dtype=np.uint8).reshape(-1)
    if np.any(bits > 1):
        raise ValueError("bit vector entries must be 0 or 1")
    if length is not None and bits.size != length:
        raise ValueError(f"expected {length} bits, got {bits.size}")
    return bits


def pack_bits(bits) -> int:
    """Pack a bit vector into an int, position ``j`` -> bit ``j``."""
    out = 0
    for j in np.flatnonzero(np.asarray(bits)):
        out |= 1 << int(j)
    return out


def unpack_bits(word: int, length: int) -> np.ndarray:
    return np.array([(word >> j) & 1 for j in range(length)], dtype=np.uint8)


def pack_rows(matrix: np.ndarray) -> np.ndarray:
    """Pack each row of a bit matrix (at most 64 columns) into ``uint64``."""
    matrix = np.asarray(matrix, dtype=np.uint64)
    if matrix.shape[-1] > 64:
        raise ValueError("packing supports at most 64 columns")
    weights = np.left_shift(np.uint64(1), np.arange(matrix.shape[-1], dtype=np.uint64))
    return (matrix * weights).sum(axis=-1, dtype=np.uint64)


def unpack_rows(words: np.ndarray, length: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    shifts = np.arange(length, dtype=np.uint64)
    return ((words[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


def gf2_rank(matrix) -> int:
    work = np.array(matrix, dtype=np.uint8) & 1
    rows, cols = work.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivots = np.flatnonzero(work[rank:, col])
        if pivots.size == 0:
            continue
        p = rank + pivots[0]
        if p != rank:
            work[[rank, p]] = work[[p, rank]]
        hits = np.flatnonzero(work[:, col])
        hits = hits[hits != rank]
        work[hits] ^= work[rank]
        rank += 1
    return rank


def gf2_systematize(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a full-row-rank matrix to ``[I_k | P]``.

    When column ``i`` has no pivot among the remaining rows it is swapped
    with the next column that does. Returns ``(systematic, perm)`` where
    ``systematic`` spans the same row space as ``matrix[:, perm]``.
    """
    work = np.array(matrix, dtype=np.uint8) & 1
    if work.ndim != 2 or work.shape[0] < 1 or work.shape[1] < 1:
        raise ValueError("expected a non-empty 2-D bit matrix")
    k, n = work.shape
    if k > n:
        raise DegenerateMatrixError(f"{k} rows cannot have full rank in {n} columns")
    perm = np.arange(n)
    for i in range(k):
        col = i
        while True:
            if col >= n:
                raise DegenerateMatrixError(f"matrix has rank {i} < {k}")
            pivots = np.flatnonzero(work[i:, col])
            if pivots.size:
                break
            col += 1
        if col != i:
            work[:, [i, col]] = work[:, [col, i]]
            perm[[i, col]] = perm[[col, i]]
        p = i + pivots[0]
        if p != i:
            work[[i, p]] = work[[p, i]]
        hits = np.flatnonzero(work[:, i])
        hits = hits[hits != i]
        work[hits] ^= work[i]
    return work, perm


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Binary linear code given by a systematic ``k x n`` generator."""

    generator: np.ndarray
    name: str = "code"

    def __post_init__(self):
        g = np.array(self.generator, dtype=np.uint8)
        if g.ndim != 2:
            raise ValueError("generator must be 2-D")
        k, n = g.shape
        if not 1 <= k < n:
            raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
        if np.any(g > 1):
            raise ValueError("generator entries must be 0 or 1")
        if not np.array_equal(g[:, :k], np.eye(k, dtype=np.uint8)):
            raise ValueError("generator is not in systematic form [I_k | P]")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @cached_property
    def packed_rows(self) -> tuple[int, ...]:
        return tuple(pack_bits(row) for row in self.generator)

    @cached_property
    def parity_check(self) -> np.ndarray:
        """``H = [P^T | I_{n-k}]`` so that ``G H^T = 0``."""
        p = self.generator[:, self.k:]
        return np.hstack([p.T, np.eye(self.n - self.k, dtype=np.uint8)])

    @classmethod
    def from_matrix(cls, matrix, name: str = "code") -> LinearCode:
        """Systematize an arbitrary full-rank generator (columns may move)."""
        systematic, _ = gf2_systematize(matrix)
        return cls(systematic, name)

    def __repr__(self):
        return f"LinearCode(name={self.name!r}, n={self.n}, k={self.k})"


def encode(code: LinearCode, message) -> np.ndarray:
    msg = np.asarray(message, dtype=np.uint8).reshape(-1)
    if msg.size != code.k:
        raise ValueError(f"message length {msg.size} != k={code.k}")
    return (msg.astype(np.int64) @ code.generator).astype(np.uint8) & 1


def encode_packed(code: LinearCode, message_bits) -> int:
    word = 0
    rows = code.packed_rows
    for i in np.flatnonzero(np.asarray(message_bits)):
        word ^= rows[i]
    return word


# ---------------------------------------------------------------------------
# GF(2)[x] with int coefficients (bit i = coefficient of x^i) and GF(2^m)
# ---------------------------------------------------------------------------

def poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_divmod(a: int, b: int) -> tuple[int, int]:
    if b == 0:
        raise ZeroDivisionError("polynomial division by zero")
    q = 0
    db = b.bit_length()
    while a.bit_length() >= db:
        shift = a.bit_length() - db
        q |= 1 << shift
        a ^= b << shift
    return q, a


class _GF2m:
    """Minimal GF(2^m) arithmetic; elements are ints below ``2^m``."""

    def __init__(self, m: int, modulus: int):
        self.m = m
        self.modulus = modulus

    def mul(self, a: int, b: int) -> int:
        _, r = poly_divmod(poly_mul(a, b), self.modulus)
        return r

    def pow(self, a: int, e: int) -> int:
        out = 1
        while e:
            if e & 1:
                out = self.mul(out, a)
            a = self.mul(a, a)
            e >>= 1
        return out

    def poly_from_roots(self, roots) -> int:
        """Product of ``(x + r)``; raises unless the result lies in GF(2)[x]."""
        coeffs = [1]
        for r in roots:
            nxt = [0] * (len(coeffs) + 1)
            for i, c in enumerate(coeffs):
                nxt[i + 1] ^= c
                nxt[i] ^= self.mul(c, r)
            coeffs = nxt
        if any(c not in (0, 1) for c in coeffs):
            raise ArithmeticError("roots are not closed under conjugation")
        return sum(c << i for i, c in enumerate(coeffs))


def cyclotomic_coset(i: int, n: int) -> list[int]:
    coset, j = [], i % n
    while j not in coset:
        coset.append(j)
        j = (2 * j) % n
    return coset


def _cyclic_generator_matrix(g: int, n: int) -> np.ndarray:
    k = n - (g.bit_length() - 1)
    rows = np.zeros((k, n), dtype=np.uint8)
    gbits = [(g >> j) & 1 for j in range(g.bit_length())]
    for i in range(k):
        rows[i, i:i + len(gbits)] = gbits
    return rows


def _extend_parity(matrix: np.ndarray) -> np.ndarray:
    parity = matrix.sum(axis=1, dtype=np.int64) & 1
    return np.hstack([matrix, parity[:, None].astype(np.uint8)])


def ebch_generator_poly() -> int:
    """lcm of the minimal polynomials of alpha, alpha^3, alpha^5 in GF(32)."""
    field_ = _GF2m(5, EBCH_PRIMITIVE_POLY)
    alpha = 0b10
    g = 1
    seen: set[int] = set()
    for i in (1, 3, 5):
        coset = cyclotomic_coset(i, 31)
        if seen.intersection(coset):
            continue
        seen.update(coset)
        g = poly_mul(g, field_.poly_from_roots(field_.pow(alpha, j) for j in coset))
    return g


def qr_generator_poly() -> int:
    """Generator of the length-47 QR code: roots beta^q for q a residue mod 47."""
    residues = sorted({(x * x) % 47 for x in range(1, 47)})
    field_ = _GF2m(23, QR_FIELD_POLY)
    beta = field_.pow(0b10, ((1 << 23) - 1) // 47)
    return field_.poly_from_roots(field_.pow(beta, q) for q in residues)


def build_ebch_32_16() -> LinearCode:
    g = ebch_generator_poly()
    return LinearCode.from_matrix(_extend_parity(_cyclic_generator_matrix(g, 31)), "ebch32")


def build_qr_48_24() -> LinearCode:
    g = qr_generator_poly()
    return LinearCode.from_matrix(_extend_parity(_cyclic_generator_matrix(g, 47)), "qr48")


CODE_BUILDERS = {"ebch32": build_ebch_32_16, "qr48": build_qr_48_24}


def build_code(name: str) -> LinearCode:
    try:
        return CODE_BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown code {name!r}; choose from {sorted(CODE_BUILDERS)}") from None


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------

def span_words(rows) -> np.ndarray:
    """All ``2^len(rows)`` XOR combinations; index bit ``i`` selects ``rows[i]``."""
    words = np.zeros(1, dtype=np.uint64)
    for row in rows:
        words = np.concatenate([words, words ^ np.uint64(row)])
    return words


def codebook_packed(code: LinearCode) -> np.ndarray:
    """All codewords indexed by message value, message bit 1 being the MSB.

    Index order therefore equals lexicographic order of the message.
    """
    if code.k > MAX_ENUMERATION_K:
        raise FeasibilityError(f"k={code.k} exceeds the enumeration limit {MAX_ENUMERATION_K}")
    return span_words(reversed(code.packed_rows))


def min_distance_bruteforce(code: LinearCode, chunk: int = 256) -> int:
    if code.k > MAX_ENUMERATION_K:
        raise FeasibilityError(f"k={code.k} exceeds the enumeration limit {MAX_ENUMERATION_K}")
    rows = code.packed_rows
    half = code.k // 2
    low = span_words(rows[:half])
    high = span_words(rows[half:])
    best = code.n
    nonzero_low = np.bitwise_count(low[1:])
    if nonzero_low.size:
        best = int(nonzero_low.min())
    for start in range(1, high.size, chunk):
        block = high[start:start + chunk, None] ^ low[None, :]
        best = min(best, int(np.bitwise_count(block).min()))
    return best


def weight_distribution(code: LinearCode) -> np.ndarray:
    if code.k > MAX_ENUMERATION_K:
        raise FeasibilityError(f"k={code.k} exceeds the enumeration limit {MAX_ENUMERATION_K}")
    rows = code.packed_rows
    half = code.k // 2
    low = span_words(rows[:half])
    high = span_words(rows[half:])
    counts = np.zeros(code.n + 1, dtype=np.int64)
    for start in range(0, high.size, 256):
        w = np.bitwise_count(high[start:start + 256, None] ^ low[None, :])
        counts += np.bincount(w.ravel(), minlength=code.n + 1)
    return counts


# ---------------------------------------------------------------------------
# Plain-text code files: "n k name" then k rows of n bits
# ---------------------------------------------------------------------------

def save_code(code: LinearCode, path) -> None:
    lines = [f"{code.n} {code.k} {code.name}"]
    lines += [" ".join(str(int(b)) for b in row) for row in code.generator]
    Path(path).write_text("\n".join(lines) + "\n")


def load_code(path) -> LinearCode:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty code file")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"{path}: header must be 'n k name'")
    n, k, name = int(head[0]), int(head[1]), head[2]
    rows = [[int(t) for t in ln.split()] for ln in lines[1:]]
    if len(rows) != k or any(len(r) != n for r in rows):
        raise ValueError(f"{path}: expected {k} rows of {n} bits")
    return LinearCode(np.array(rows, dtype=np.uint8), name)
