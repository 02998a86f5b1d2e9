"""Training data generation and the MCTS policy-training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import hard_decision, make_rng, normalize_llr, simulate
from .decoders import StoppingRule, mcts_decode, mld_exhaustive, osd_decode, policy_tables
from .gf2 import LinearCode, build_code
from .mcts import C_PUCT, SearchTree, make_context, run_search, visit_distributions
from .policy import Adam, FramePolicy, PolicyModel, TrainingDivergence, init_model, loss_and_grad
from .teptree import TreeParams, bits_to_tep, max_depth

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingSample:
    received: np.ndarray
    codeword: np.ndarray
    target: tuple
    snr_db: float


@dataclass
class TrainConfig:
    code: str = "ebch32"
    order: int = 5
    dataset_size: int = 110_000
    max_steps: int | None = None
    episodes: int = 3000
    hidden_layers: int = 3
    batch_size: int = 4096
    learning_rate: float = 1e-4
    epochs: int = 150
    c_puct: float = C_PUCT
    seed: int = 0
    oracle_order: int = 4
    snr_lo: float = 0.0
    snr_hi: float = 5.0
    classic_mcts: bool = False
    strict_reachability: bool = False
    use_generator: bool = True
    shuffle: bool = True
    target_states: str = "all"
    prior_mix: float = 0.0

    def __post_init__(self):
        if self.target_states not in ("all", "path"):
            raise ValueError(f"target_states must be 'all' or 'path', got {self.target_states!r}")
        if not 0.0 <= self.prior_mix <= 1.0:
            raise ValueError(f"prior_mix must lie in [0, 1], got {self.prior_mix}")

    def resolved_max_steps(self, k: int) -> int:
        return self.max_steps or max_depth(TreeParams(k, self.order))


PRESETS = {
    "full-ebch32": TrainConfig(),
    "full-qr48": TrainConfig(code="qr48", order=6, dataset_size=1_200_000, episodes=10_000,
                               hidden_layers=6),
    # Desk scale: small enough for one CPU core in a few hours.
    "desk-ebch32": TrainConfig(dataset_size=20_000, episodes=500, epochs=20, batch_size=512,
                               learning_rate=1e-3, target_states="path", prior_mix=0.25),
}


def preset(name: str, **overrides) -> TrainConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


def target_tep(received, codeword, k: int) -> tuple:
    """Positions where ``codeword`` disagrees with the hard-decided information bits."""
    diff = hard_decision(np.asarray(received)[:k]) ^ np.asarray(codeword, dtype=np.uint8)[:k]
    return bits_to_tep(diff)


def make_sample(code: LinearCode, received, snr_db: float, oracle_order: int) -> TrainingSample:
    received = np.asarray(received, dtype=np.float64)
    c_star = osd_decode(code, received, oracle_order).codeword
    return TrainingSample(received, c_star, target_tep(received, c_star, code.k), float(snr_db))


def generate_dataset(code: LinearCode, size: int, order: int, rng: np.random.Generator,
                     snr_lo: float = 0.0, snr_hi: float = 5.0, oracle_order: int = 4,
                     random_messages: bool = True):
    """Draw frames at uniform SNR and label them with full OSD at ``oracle_order``.

    Samples whose target weight exceeds ``order`` are dropped and replaced.
    Returns ``(samples, drawn)``.
    """
    if oracle_order < 3:
        raise ValueError("oracle order below 3 is not near-MLD for these codes")
    samples = []
    drawn = 0
    zero = np.zeros(code.k, dtype=np.uint8)
    while len(samples) < size:
        snr = float(rng.uniform(snr_lo, snr_hi))
        msg = rng.integers(0, 2, code.k, dtype=np.uint8) if random_messages else zero
        frame = simulate(code, msg, snr, rng)
        drawn += 1
        sample = make_sample(code, frame.received, snr, oracle_order)
        if len(sample.target) <= order:
            samples.append(sample)
    return samples, drawn


# ---------------------------------------------------------------------------
# Dataset files: "name n k m count", then one tab-separated line per sample:
# snr_db, received values, codeword bits, target positions.
# ---------------------------------------------------------------------------

def save_dataset(samples, code: LinearCode, order: int, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{code.name} {code.n} {code.k} {order} {len(samples)}\n")
        for s in samples:
            fh.write("\t".join([
                repr(float(s.snr_db)),
                " ".join(f"{v:.17g}" for v in s.received),
                "".join(str(int(b)) for b in s.codeword),
                " ".join(str(z) for z in s.target),
            ]) + "\n")


def load_dataset(path):
    """Returns ``(samples, header)`` with header keys name, n, k, m, count."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 5:
            raise ValueError(f"{path}: header must be 'name n k m count'")
        header = {"name": head[0], "n": int(head[1]), "k": int(head[2]),
                  "m": int(head[3]), "count": int(head[4])}
        samples = []
        for line in fh:
            if not line.strip():
                continue
            snr, r, c, e = line.rstrip("\n").split("\t")
            samples.append(TrainingSample(
                np.array([float(v) for v in r.split()]),
                np.array([int(b) for b in c], dtype=np.uint8),
                tuple(int(z) for z in e.split()),
                float(snr)))
    if len(samples) != header["count"]:
        raise ValueError(f"{path}: header says {header['count']} samples, found {len(samples)}")
    return samples, header


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    avg_episodes_to_target: float
    buffer_steps: int


@dataclass
class _Pending:
    sample: int
    tep: tuple
    word: int
    distance: float
    mask: tuple
    target: tuple


@dataclass
class Trainer:
    """Runs the per-sample searches and consumes the replay buffer in batches."""

    code: LinearCode
    config: TrainConfig
    model: PolicyModel = None
    metrics: list = field(default_factory=list)

    def __post_init__(self):
        if self.model is None:
            self.model = init_model(self.code.k, self.code.n, self.config.hidden_layers, self.config.seed)
        self.optimizer = Adam(self.model, lr=self.config.learning_rate)
        self.params = TreeParams(self.code.k, self.config.order)
        self.max_steps = self.config.resolved_max_steps(self.code.k)
        self.buffer: list[_Pending] = []
        self._llr_norm: dict[int, np.ndarray] = {}
        self._losses: list[float] = []
        self.steps = 0

    def search_sample(self, idx: int, sample: TrainingSample, trace=None):
        llr_norm = self._llr_norm.get(idx)
        if llr_norm is None:
            llr_norm = self._llr_norm[idx] = normalize_llr(sample.received)
        policy = FramePolicy(self.model, self.code, llr_norm, self.config.use_generator,
                             policy_tables(self.model, self.code))
        ctx = make_context(self.code, sample.received, self.params, policy, self.config.c_puct,
                           self.config.prior_mix)
        ctx.strict = self.config.strict_reachability
        tree = SearchTree(ctx)
        return run_search(tree, sample.target, self.config.episodes, self.max_steps,
                          self.config.classic_mcts, trace)

    def collect(self, idx: int, result, target=None) -> None:
        ctx = result.tree.context
        on_path = target if self.config.target_states == "path" else None
        for node, pi in visit_distributions(result.tree, on_path):
            self.buffer.append(_Pending(idx, node.tep, node.word, ctx.distance(node), node.legal, pi))

    def featurize_batch(self, entries, samples):
        code = self.code
        k, n = code.k, code.n
        x = np.zeros((len(entries), self.model.d_in))
        if self.config.use_generator:
            x[:, k + n + 1:k + n + 1 + k * n] = code.generator.reshape(-1)
        shifts = np.arange(n)
        for row, e in enumerate(entries):
            for z in e.tep:
                x[row, z - 1] = 1.0
            x[row, k:k + n] = (e.word >> shifts) & 1
            x[row, k + n] = e.distance
            x[row, k + n + 1 + k * n:] = self._llr_norm[e.sample]
        targets = np.array([e.target for e in entries])
        mask = np.array([e.mask for e in entries], dtype=bool)
        return x, targets, mask

    def optimize(self, entries, samples) -> float:
        x, targets, mask = self.featurize_batch(entries, samples)
        loss, grads = loss_and_grad(self.model, x, targets, mask)
        if not np.isfinite(loss):
            raise TrainingDivergence(f"loss became {loss} after {self.steps} steps")
        self.optimizer.step(self.model, grads)
        self.steps += 1
        self._losses.append(loss)
        return loss

    def run_epoch(self, samples, epoch: int, rng: np.random.Generator | None = None) -> EpochMetrics:
        order = np.arange(len(samples))
        if rng is not None and self.config.shuffle:
            rng.shuffle(order)
        self._losses = []
        steps_before = self.steps
        found_at = []
        b = self.config.batch_size
        for idx in order:
            idx = int(idx)
            result = self.search_sample(idx, samples[idx])
            found_at.append(result.first_found or self.config.episodes)
            self.collect(idx, result, samples[idx].target)
            while len(self.buffer) >= b:
                batch, self.buffer = self.buffer[:b], self.buffer[b:]
                self.optimize(batch, samples)
        if self.buffer:
            self.optimize(self.buffer, samples)
            self.buffer = []
        m = EpochMetrics(epoch, float(np.mean(self._losses)) if self._losses else float("nan"),
                         float(np.mean(found_at)) if found_at else 0.0, self.steps - steps_before)
        self.metrics.append(m)
        log.info("epoch %d loss=%.5f episodes_to_target=%.2f steps=%d",
                 m.epoch, m.loss, m.avg_episodes_to_target, m.buffer_steps)
        return m

    def train(self, samples, epochs: int | None = None, callback=None) -> PolicyModel:
        rng = make_rng(self.config.seed, 1)
        for epoch in range(1, (epochs or self.config.epochs) + 1):
            m = self.run_epoch(samples, epoch, rng)
            if callback is not None:
                callback(self, m)
        return self.model


def train(config: TrainConfig, samples=None, code: LinearCode | None = None,
          model: PolicyModel | None = None, callback=None):
    """Generate data if needed, train, and return ``(model, metrics)``."""
    code = code or build_code(config.code)
    if samples is None:
        samples, drawn = generate_dataset(code, config.dataset_size, config.order,
                                          make_rng(config.seed, 0), config.snr_lo, config.snr_hi,
                                          config.oracle_order)
        log.info("dataset: kept %d of %d drawn frames", len(samples), drawn)
    trainer = Trainer(code, config, model)
    trainer.train(samples, callback=callback)
    return trainer.model, trainer.metrics


def write_metrics(metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "avg_episodes_to_target", "buffer_steps"])
        for m in metrics:
            w.writerow([m.epoch, f"{m.loss:.17g}", f"{m.avg_episodes_to_target:.17g}", m.buffer_steps])


def evaluate_policy(model: PolicyModel | None, code: LinearCode, frames, order: int,
                    oracles=None) -> float:
    """Mean TEPs the policy-guided decoder visits before hitting the MLD codeword.

    ``frames`` are received vectors; ``oracles`` defaults to exhaustive MLD.
    """
    counts = per_frame_teps(model, code, frames, order, oracles)
    return float(np.mean(counts))


def per_frame_teps(model, code: LinearCode, frames, order: int, oracles=None) -> np.ndarray:
    counts = []
    for i, r in enumerate(frames):
        oracle = oracles[i] if oracles is not None else mld_exhaustive(code, r)
        out = mcts_decode(code, r, order, model, stop=StoppingRule.perfect(oracle))
        counts.append(out.teps_visited)
    return np.array(counts)


def greedy_rollout(model: PolicyModel, code: LinearCode, received, m: int, target=None,
                   max_steps: int | None = None, use_generator: bool = True) -> list:
    """Follow the higher-prior action from the root; returns the TEPs visited.

    Stops at ``target`` (if given), at a leaf, or after ``max_steps`` moves.
    """
    params = TreeParams(code.k, m)
    received = np.asarray(received, dtype=np.float64)
    policy = FramePolicy(model, code, normalize_llr(received), use_generator, policy_tables(model, code))
    ctx = make_context(code, received, params, policy)
    tree = SearchTree(ctx)
    node = tree.root
    path = [node.tep]
    limit = max_steps if max_steps is not None else max_depth(params)
    target = tuple(target) if target is not None else None
    for _ in range(limit):
        if node.tep == target:
            break
        ctx.ensure_priors(node)
        ext, adj = node.legal
        if not (ext or adj):
            break
        action = 0 if ext and (not adj or node.prior[0] >= node.prior[1]) else 1
        node = tree.expand(node, action)
        path.append(node.tep)
    return path


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
