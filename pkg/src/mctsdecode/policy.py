"""Dense policy network over TEP-tree states, written directly in numpy.

Input layout per state: ``[tep bits (k) | candidate bits (n) | distance (1)
| generator rows concatenated (k*n) | normalized LLRs (n)]``. Two outputs
(extend, adjacent) pass through a softmax restricted to the legal actions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gf2 import LinearCode

MAGIC = b"MCTSPOL\x00"
FORMAT_VERSION = 1
HIDDEN_UNITS = 128
LOG_EPS = 1e-12


class CheckpointError(ValueError):
    pass


class TrainingDivergence(FloatingPointError):
    pass


def input_dim(k: int, n: int) -> int:
    return k + k * n + 2 * n + 1


def nn_flops(k: int, n: int, hidden_layers: int, units: int = HIDDEN_UNITS) -> int:
    return input_dim(k, n) * units + (hidden_layers - 1) * units**2 + units * 2


@dataclass(eq=False)
class PolicyModel:
    k: int
    n: int
    hidden_layers: int
    units: int = HIDDEN_UNITS
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    activation: str = "relu"
    version: int = 0

    @property
    def d_in(self) -> int:
        return input_dim(self.k, self.n)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.d_in] + [self.units] * self.hidden_layers + [2]

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> PolicyModel:
        return PolicyModel(self.k, self.n, self.hidden_layers, self.units,
                           [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                           self.activation)


def init_model(k: int, n: int, hidden_layers: int, seed: int = 0,
               units: int = HIDDEN_UNITS, d_in: int | None = None) -> PolicyModel:
    """Glorot-uniform weights, zero biases.

    ``d_in`` overrides the input width for toy models in tests.
    """
    if hidden_layers < 1:
        raise ValueError("need at least one hidden layer")
    rng = np.random.default_rng(seed)
    model = PolicyModel(k, n, hidden_layers, units)
    sizes = [d_in or model.d_in] + [units] * hidden_layers + [2]
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        model.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        model.biases.append(np.zeros(fan_out))
    return model


def featurize(tep, candidate, distance: float, code: LinearCode, llr_norm,
              use_generator: bool = True) -> np.ndarray:
    k, n = code.k, code.n
    candidate = np.asarray(candidate).reshape(-1)
    llr_norm = np.asarray(llr_norm, dtype=np.float64).reshape(-1)
    if candidate.size != n or llr_norm.size != n:
        raise ValueError(f"expected candidate and LLRs of length n={n}")
    f = np.zeros(input_dim(k, n))
    for z in tep:
        if not 1 <= z <= k:
            raise ValueError(f"TEP position {z} outside [1, {k}]")
        f[z - 1] = 1.0
    f[k:k + n] = candidate
    f[k + n] = distance
    if use_generator:
        f[k + n + 1:k + n + 1 + k * n] = code.generator.reshape(-1)
    f[k + n + 1 + k * n:] = llr_norm
    return f


def _masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(model: PolicyModel, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def forward(model: PolicyModel, features, mask) -> np.ndarray:
    """Action probabilities, shape ``(B, 2)``; also accepts a single state."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if x.shape[1] != model.weights[0].shape[0]:
        raise ValueError(f"feature length {x.shape[1]} != {model.weights[0].shape[0]}")
    if mask.shape != (x.shape[0], 2) or not mask.any(axis=1).all():
        raise ValueError("every state needs a (2,) mask with at least one legal action")
    acts, _ = _forward_cache(model, x)
    return _masked_softmax(acts[-1], mask)


def loss_and_grad(model: PolicyModel, features, targets, mask):
    """Mean cross-entropy against visit distributions and its gradients.

    Returns ``(loss, (weight_grads, bias_grads))``.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    pi = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    batch = x.shape[0]
    if batch == 0:
        raise ValueError("empty batch")
    acts, pre = _forward_cache(model, x)
    p = _masked_softmax(acts[-1], mask)
    pi = np.where(mask, pi, 0.0)
    loss = -float(np.sum(pi * np.log(np.maximum(p, LOG_EPS)))) / batch
    delta = np.where(mask, p * pi.sum(axis=1, keepdims=True) - pi, 0.0) / batch
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0)
    return loss, (gw, gb)


class Adam:
    def __init__(self, model: PolicyModel, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in model.parameters()]
        self.v = [np.zeros_like(p) for p in model.parameters()]
        self.t = 0

    def step(self, model: PolicyModel, grads) -> PolicyModel:
        gw, gb = grads
        flat = []
        for w, b in zip(gw, gb):
            flat += [w, b]
        for g in flat:
            if not np.all(np.isfinite(g)):
                raise TrainingDivergence("non-finite gradient")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for param, g, m, v in zip(model.parameters(), flat, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        model.version += 1
        return model


def adam_step(model: PolicyModel, grads, optimizer: Adam) -> PolicyModel:
    return optimizer.step(model, grads)


class FramePolicy:
    """Fast single-state priors for one received frame.

    The generator and normalized-LLR blocks of the first layer are constant
    over a frame, and the candidate-codeword block is folded into per-byte
    tables, so one call costs a few small vector ops.
    """

    def __init__(self, model: PolicyModel, code: LinearCode, llr_norm,
                 use_generator: bool = True, tables=None):
        k, n = code.k, code.n
        w1 = model.weights[0]
        self.model = model
        self._w_tep = w1[:k]
        self._w_dist = w1[k + n]
        const = model.biases[0] + llr_norm @ w1[k + n + 1 + k * n:]
        if use_generator:
            const = const + code.generator.reshape(-1).astype(np.float64) @ w1[k + n + 1:k + n + 1 + k * n]
        self._const = const
        self._cand_tables = tables if tables is not None else candidate_tables(model, code)
        self._rest = list(zip(model.weights[1:], model.biases[1:]))

    def logit_gap(self, tep, word: int, distance: float) -> float:
        """``logit(extend) - logit(adjacent)``."""
        h = self._const + distance * self._w_dist
        for z in tep:
            h = h + self._w_tep[z - 1]
        for table in self._cand_tables:
            h = h + table[word & 0xFF]
            word >>= 8
        for w, b in self._rest:
            h = np.maximum(h, 0.0) @ w + b
        return float(h[0] - h[1])

    def priors(self, tep, word: int, distance: float) -> tuple[float, float]:
        gap = self.logit_gap(tep, word, distance)
        if gap >= 0:
            q = np.exp(-gap)
            return 1.0 / (1.0 + q), q / (1.0 + q)
        q = np.exp(gap)
        return q / (1.0 + q), 1.0 / (1.0 + q)


def candidate_tables(model: PolicyModel, code: LinearCode) -> np.ndarray:
    """Per byte of a packed codeword, the first-layer contribution of each value."""
    k, n = code.k, code.n
    w_c = model.weights[0][k:k + n]
    nbytes = (n + 7) // 8
    padded = np.zeros((nbytes * 8, w_c.shape[1]))
    padded[:n] = w_c
    bits = ((np.arange(256)[:, None] >> np.arange(8)) & 1).astype(np.float64)
    return np.stack([bits @ padded[8 * j:8 * j + 8] for j in range(nbytes)])


# ---------------------------------------------------------------------------
# Checkpoints: magic, version, k, n, h, units, then little-endian float64
# blobs (W then b, layer by layer).
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<8sIIIII")


def checkpoint_bytes(model: PolicyModel) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, model.k, model.n, model.hidden_layers, model.units)]
    for p in model.parameters():
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(model: PolicyModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path, k: int | None = None, n: int | None = None) -> PolicyModel:
    """Read a checkpoint; ``k``/``n`` if given must match the stored code size."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, ck, cn, h, units = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a policy checkpoint")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if (k is not None and ck != k) or (n is not None and cn != n):
        raise CheckpointError(f"{path}: checkpoint is for (n={cn}, k={ck}), expected (n={n}, k={k})")
    model = PolicyModel(ck, cn, h, units)
    offset = _HEADER.size
    sizes = model.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            count = int(np.prod(shape))
            end = offset + 8 * count
            if end > len(data):
                raise CheckpointError(f"{path}: truncated parameters")
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
            (model.weights if len(shape) == 2 else model.biases).append(arr)
            offset = end
    if offset != len(data):
        raise CheckpointError(f"{path}: trailing bytes after parameters")
    if not all(np.all(np.isfinite(p)) for p in model.parameters()):
        raise CheckpointError(f"{path}: non-finite parameters")
    return model


def describe(model: PolicyModel) -> str:
    lines = [
        f"k={model.k} n={model.n}",
        f"d_in={model.d_in}",
        f"hidden_layers={model.hidden_layers} units={model.units} activation={model.activation}",
        f"layers={' -> '.join(str(s) for s in model.layer_sizes)}",
        f"parameters={model.parameter_count}",
        f"forward_flops={nn_flops(model.k, model.n, model.hidden_layers, model.units)}",
    ]
    return "\n".join(lines)
