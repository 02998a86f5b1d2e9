"""Monte-Carlo BLER campaigns: configuration, the frame loop and result files.

Every (SNR, decoder, order) run sees the same frame sequence, so runs are
paired. Frames are drawn in fixed-size chunks, chunk ``j`` at SNR index
``i`` coming from its own sub-seeded stream, and results are consumed in
chunk order. The tabulated numbers therefore do not depend on the number
of worker processes; only wall times do.
"""

from __future__ import annotations

import csv
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .channel import simulate
from .decoders import DECODERS, StoppingRule, decode, mld_exhaustive
from .gf2 import LinearCode, build_code, load_code
from .policy import init_model, load_checkpoint

log = logging.getLogger(__name__)

FRAME_FIELDS = ["frame_id", "snr_db", "decoder", "order", "teps_visited", "distance",
                "stop_reason", "correct", "wall_time_us"]
SUMMARY_FIELDS = ["snr_db", "decoder", "order", "bler", "avg_teps", "avg_time", "frames", "errors"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    code: str = "ebch32"
    decoders: tuple = ("osd",)
    orders: tuple = (3,)
    snr_db: tuple = (0.0, 2.0, 4.0)
    stop: str = "none"
    tau: float = 0.9
    target_errors: int = 50
    max_frames: int = 20_000
    seed: int = 0
    checkpoint: str | None = None
    budget: int | None = None
    random_messages: bool = True
    chunk: int = 64
    threads: int = 1
    timing: bool = True
    frames_csv: str | None = None
    summary_csv: str | None = None
    gnuplot_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.snr_db:
            raise ConfigError("snr grid is empty")
        if self.target_errors < 1:
            raise ConfigError("target_errors must be at least 1")
        if self.max_frames < 1 or self.chunk < 1 or self.threads < 1:
            raise ConfigError("max_frames, chunk and threads must be positive")
        for name in self.decoders:
            if name not in DECODERS:
                raise ConfigError(f"unknown decoder {name!r}; choose from {DECODERS}")
        if self.stop not in ("none", "perfect", "probability"):
            raise ConfigError(f"unknown stopping rule {self.stop!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")

    def runs(self) -> list[tuple[str, int]]:
        """``(decoder, order)`` pairs; MLD ignores the order and appears once."""
        out = []
        for name in self.decoders:
            if name == "mld":
                out.append((name, 0))
            else:
                out.extend((name, m) for m in self.orders)
        return out


PRESETS = {
    "ebch32-quick": ExperimentConfig(decoders=("osd", "non-ge-osd"), orders=(1, 3),
                                     snr_db=(0.0, 2.0, 4.0), target_errors=50, max_frames=5000),
    "ebch32-paper-shape": ExperimentConfig(decoders=("osd", "non-ge-osd", "mcts"), orders=(3, 5),
                                           snr_db=(0.0, 1.0, 2.0, 3.0, 4.0, 5.0),
                                           target_errors=200, max_frames=100_000),
}


_TUPLE_TYPES = {"decoders": str, "orders": int, "snr_db": float}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(key: str, text: str):
    known = {f.name: f for f in fields(ExperimentConfig)}
    if key not in known:
        raise ConfigError(f"unknown config key {key!r}")
    text = text.strip()
    if key in _TUPLE_TYPES:
        items = [t.strip() for t in text.split(",") if t.strip()]
        try:
            return tuple(_TUPLE_TYPES[key](t) for t in items)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    default = getattr(ExperimentConfig, key, None)
    try:
        if key in ("checkpoint", "budget", "frames_csv", "summary_csv", "gnuplot_dir"):
            if text.lower() in ("", "none"):
                return None
            return int(text) if key == "budget" else text
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return text


def parse_overrides(pairs) -> dict:
    """``["key=value", ...]`` to typed config fields."""
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key = key.strip()
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, overrides=(), base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a flat ``key = value`` file (``#`` starts a comment), then apply overrides."""
    values = {}
    if path is not None:
        lines = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            lines.append(line)
        values.update(parse_overrides(lines))
    values.update(parse_overrides(overrides))
    return replace(base or ExperimentConfig(), **values)


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


@dataclass
class MetricRow:
    snr_db: float
    decoder: str
    order: int
    bler: float
    avg_teps: float
    avg_time: float
    frames: int
    errors: int


@dataclass
class FrameRecord:
    frame_id: int
    snr_db: float
    decoder: str
    order: int
    teps_visited: int
    distance: float
    stop_reason: str
    correct: bool
    wall_time_us: int


@dataclass
class BenchResult:
    rows: list[MetricRow]
    frames: list[FrameRecord] = field(default_factory=list)


def resolve_code(spec: str) -> LinearCode:
    """A builder name or a path to a code file."""
    try:
        return build_code(spec)
    except ValueError:
        if os.path.exists(spec):
            return load_code(spec)
        raise


def _chunk_frames(code, snr, seed, snr_index, chunk_index, size, random_messages):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, snr_index, chunk_index])))
    zero = np.zeros(code.k, dtype=np.uint8)
    for _ in range(size):
        msg = rng.integers(0, 2, code.k, dtype=np.uint8) if random_messages else zero
        yield simulate(code, msg, snr, rng)


def _decode_chunk(task):
    """Decode one chunk of frames with every run still collecting errors."""
    code, model, config, snr, snr_index, chunk_index, runs = task
    out = {run: [] for run in runs}
    frames = _chunk_frames(code, snr, config.seed, snr_index, chunk_index, config.chunk,
                           config.random_messages)
    for frame in frames:
        stop = StoppingRule(config.stop, tau=config.tau) if config.stop != "perfect" else \
            StoppingRule.perfect(mld_exhaustive(code, frame.received))
        for name, m in runs:
            t0 = time.perf_counter()
            res = decode(name, code, frame.received, m, stop, frame.llr, model, config.budget)
            elapsed = time.perf_counter() - t0
            correct = bool(np.array_equal(res.codeword, frame.codeword))
            wall_us = int(round(elapsed * 1e6)) if config.timing else 0
            out[(name, m)].append((res.teps_visited, res.distance, res.stop_reason, correct, wall_us))
    return out


def aggregate(records, snr: float, decoder: str, order: int) -> MetricRow:
    frames = len(records)
    errors = sum(1 for r in records if not r.correct)
    teps = sum(r.teps_visited for r in records)
    time_us = sum(r.wall_time_us for r in records)
    return MetricRow(snr, decoder, order, errors / frames, teps / frames, time_us / frames / 1e6,
                     frames, errors)


def _load_model(config: ExperimentConfig, code: LinearCode):
    if "mcts" not in config.decoders:
        return None
    if config.checkpoint is None:
        log.warning("no checkpoint given; mcts runs use a randomly initialized policy")
        return init_model(code.k, code.n, 3, config.seed)
    if not os.path.exists(config.checkpoint):
        raise FileNotFoundError(f"checkpoint {config.checkpoint} not found")
    return load_checkpoint(config.checkpoint, code.k, code.n)


def run_benchmark(config: ExperimentConfig, code: LinearCode | None = None, model=None) -> BenchResult:
    config.validate()
    code = code or resolve_code(config.code)
    if model is None:
        model = _load_model(config, code)
    runs = config.runs()
    rows, records = [], []
    pool = ProcessPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for i, snr in enumerate(config.snr_db):
            collected = {run: [] for run in runs}
            active = list(runs)
            chunk_index = 0
            while active:
                wave = [(code, model, config, snr, i, chunk_index + j, tuple(active))
                        for j in range(config.threads)]
                chunk_index += len(wave)
                results = pool.map(_decode_chunk, wave) if pool else map(_decode_chunk, wave)
                for result in results:
                    for run in list(active):
                        got = collected[run]
                        for item in result[run]:
                            got.append(item)
                            errors = sum(1 for it in got if not it[3])
                            if errors >= config.target_errors or len(got) >= config.max_frames:
                                active.remove(run)
                                break
            for name, m in runs:
                recs = [FrameRecord(fid, snr, name, m, *item) for fid, item in enumerate(collected[(name, m)])]
                records.extend(recs)
                row = aggregate(recs, snr, name, m)
                rows.append(row)
                log.info("snr=%g %s m=%d bler=%.3g teps=%.1f frames=%d", snr, name, m,
                         row.bler, row.avg_teps, row.frames)
    finally:
        if pool is not None:
            pool.shutdown()
    result = BenchResult(rows, records)
    write_outputs(result, config)
    return result


def host_header(config: ExperimentConfig) -> list[str]:
    """Comment lines naming the host; left out when timing is off so files stay byte-stable."""
    if not config.timing:
        return []
    return [f"# host={platform.node()} machine={platform.machine()} "
            f"python={platform.python_version()} numpy={np.__version__} cpus={os.cpu_count()}"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_frames_csv(records, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in FRAME_FIELDS])


def write_summary_csv(rows, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in SUMMARY_FIELDS])


def read_frames_csv(path) -> list[FrameRecord]:
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append(FrameRecord(int(row["frame_id"]), float(row["snr_db"]), row["decoder"],
                               int(row["order"]), int(row["teps_visited"]), float(row["distance"]),
                               row["stop_reason"], row["correct"] == "1", int(row["wall_time_us"])))
    return out


def read_summary_csv(path) -> list[MetricRow]:
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return [MetricRow(float(r["snr_db"]), r["decoder"], int(r["order"]), float(r["bler"]),
                      float(r["avg_teps"]), float(r["avg_time"]), int(r["frames"]), int(r["errors"]))
            for r in csv.DictReader(lines)]


def write_gnuplot(rows, directory) -> list[Path]:
    """One whitespace-separated table per panel: BLER, mean TEPs and mean time vs SNR.

    Columns are ``snr_db`` followed by one column per decoder/order series;
    missing points are written as ``NaN``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    series = []
    for r in rows:
        key = (r.decoder, r.order)
        if key not in series:
            series.append(key)
    snrs = sorted({r.snr_db for r in rows})
    table = {(r.snr_db, r.decoder, r.order): r for r in rows}
    names = [f"{d}_m{m}" if d != "mld" else d for d, m in series]
    paths = []
    for panel, attr in (("bler", "bler"), ("teps", "avg_teps"), ("time", "avg_time")):
        path = directory / f"{panel}.dat"
        with open(path, "w") as fh:
            fh.write(f"# {panel} versus snr_db\n")
            fh.write("# snr_db " + " ".join(names) + "\n")
            for snr in snrs:
                vals = []
                for d, m in series:
                    row = table.get((snr, d, m))
                    vals.append(repr(float(getattr(row, attr))) if row else "NaN")
                fh.write(f"{snr!r} " + " ".join(vals) + "\n")
        paths.append(path)
    return paths


def write_outputs(result: BenchResult, config: ExperimentConfig) -> None:
    header = host_header(config)
    if config.frames_csv:
        write_frames_csv(result.frames, config.frames_csv, header)
    if config.summary_csv:
        write_summary_csv(result.rows, config.summary_csv, header)
    if config.gnuplot_dir:
        write_gnuplot(result.rows, config.gnuplot_dir)


def recompute_rows(records) -> list[MetricRow]:
    """Summary rows rebuilt from per-frame records, in first-seen order."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.snr_db, r.decoder, r.order), []).append(r)
    return [aggregate(recs, *key) for key, recs in groups.items()]


def bler_monotone(rows, decoder: str, order: int, sigmas: float = 2.0) -> bool:
    """BLER non-increasing in SNR up to ``sigmas`` binomial standard errors."""
    pts = sorted((r for r in rows if r.decoder == decoder and r.order == order), key=lambda r: r.snr_db)
    for a, b in zip(pts, pts[1:]):
        se = np.sqrt(a.bler * (1 - a.bler) / a.frames + b.bler * (1 - b.bler) / b.frames)
        if b.bler > a.bler + sigmas * se:
            return False
    return True
