"""Command-line entry point: ``mctsdecode <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import bench, trainer
from .channel import load_frame, make_rng
from .decoders import DECODERS, StoppingRule, decode, mld_exhaustive
from .gf2 import CODE_BUILDERS, build_code, save_code
from .policy import describe, load_checkpoint, save_checkpoint
from .teptree import TreeParams, inspect_lines


def cmd_build_code(args) -> int:
    code = build_code(args.name)
    save_code(code, args.out)
    print(f"wrote {code.name} ({code.n},{code.k}) to {args.out}")
    return 0


def cmd_gen_data(args) -> int:
    code = bench.resolve_code(args.code)
    rng = make_rng(args.seed, 0)
    samples, drawn = trainer.generate_dataset(code, args.size, args.order, rng, args.snr_lo,
                                              args.snr_hi, args.oracle_order)
    trainer.save_dataset(samples, code, args.order, args.out)
    print(f"kept {len(samples)} of {drawn} frames; wrote {args.out}")
    return 0


def _train_overrides(args) -> dict:
    names = {f.name for f in fields(trainer.TrainConfig)}
    out = {}
    for pair in args.set or ():
        key, sep, value = pair.partition("=")
        if not sep or key not in names:
            raise ValueError(f"bad override {pair!r}")
        current = getattr(trainer.TrainConfig, key, None)
        if isinstance(current, bool):
            out[key] = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int) or key == "max_steps":
            out[key] = int(value)
        elif isinstance(current, float):
            out[key] = float(value)
        else:
            out[key] = value
    return out


def cmd_train(args) -> int:
    config = trainer.preset(args.preset, **_train_overrides(args))
    code = build_code(config.code)
    samples = None
    if args.data:
        samples, header = trainer.load_dataset(args.data)
        if (header["n"], header["k"]) != (code.n, code.k):
            raise ValueError(f"dataset is for ({header['n']},{header['k']}), "
                             f"config code is ({code.n},{code.k})")
    model = load_checkpoint(args.resume, code.k, code.n) if args.resume else None

    def report(tr, m):
        print(f"epoch {m.epoch} loss {m.loss:.6g} episodes {m.avg_episodes_to_target:.2f} "
              f"steps {m.buffer_steps}", flush=True)
        if args.out:
            save_checkpoint(tr.model, args.out)

    model, metrics = trainer.train(config, samples, code, model, report)
    if args.out:
        save_checkpoint(model, args.out)
    if args.metrics:
        trainer.write_metrics(metrics, args.metrics)
    return 0


def cmd_decode(args) -> int:
    code = bench.resolve_code(args.code)
    frame = load_frame(args.frame)
    if frame.n != code.n:
        raise ValueError(f"frame length {frame.n} does not match code length {code.n}")
    model = load_checkpoint(args.checkpoint, code.k, code.n) if args.checkpoint else None
    if args.stop == "perfect":
        stop = StoppingRule.perfect(mld_exhaustive(code, frame.received))
    elif args.stop == "probability":
        stop = StoppingRule.probability(args.tau)
    else:
        stop = StoppingRule.none()
    out = decode(args.decoder, code, frame.received, args.order, stop, frame.llr, model, args.budget)
    print("codeword " + "".join(str(int(b)) for b in out.codeword))
    print(f"distance {out.distance!r}")
    print(f"teps_visited {out.teps_visited}")
    print(f"stop_reason {out.stop_reason}")
    print(f"wall_time {out.wall_time:.6f}")
    print(f"correct {int((out.codeword == frame.codeword).all())}")
    return 0


def cmd_bench(args) -> int:
    base = bench.PRESETS[args.preset] if args.preset else None
    overrides = list(args.set or ())
    for key in ("frames_csv", "summary_csv", "gnuplot_dir", "checkpoint"):
        value = getattr(args, key)
        if value is not None:
            overrides.append(f"{key}={value}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.no_timing:
        overrides.append("timing=0")
    config = bench.load_config(args.config, overrides, base)
    result = bench.run_benchmark(config)
    print(",".join(bench.SUMMARY_FIELDS))
    for r in result.rows:
        print(f"{r.snr_db:g},{r.decoder},{r.order},{r.bler:.6g},{r.avg_teps:.6g},"
              f"{r.avg_time:.6g},{r.frames},{r.errors}")
    return 0


def cmd_inspect_tree(args) -> int:
    for line in inspect_lines(TreeParams(args.k, args.m)):
        print(line)
    return 0


def cmd_describe_model(args) -> int:
    print(describe(load_checkpoint(args.checkpoint)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mctsdecode", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-code", help="write a benchmark code's generator matrix")
    p.add_argument("name", choices=sorted(CODE_BUILDERS))
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_build_code)

    p = sub.add_parser("gen-data", help="generate a labelled training set")
    p.add_argument("--code", default="ebch32", help="builder name or code file")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--oracle-order", type=int, default=4)
    p.add_argument("--snr-lo", type=float, default=0.0)
    p.add_argument("--snr-hi", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a policy network with MCTS targets")
    p.add_argument("--preset", default="desk-ebch32", choices=sorted(trainer.PRESETS))
    p.add_argument("--data", help="dataset file (generated from the preset when omitted)")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    p.add_argument("-o", "--out", help="checkpoint path, rewritten after every epoch")
    p.add_argument("--metrics", help="per-epoch metrics CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode one frame file")
    p.add_argument("frame")
    p.add_argument("--code", default="ebch32")
    p.add_argument("--decoder", default="osd", choices=DECODERS)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--checkpoint")
    p.add_argument("--budget", type=int)
    p.add_argument("--stop", default="none", choices=("none", "perfect", "probability"))
    p.add_argument("--tau", type=float, default=0.9)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="run a Monte-Carlo BLER campaign")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(bench.PRESETS))
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--checkpoint")
    p.add_argument("--frames-csv")
    p.add_argument("--summary-csv")
    p.add_argument("--gnuplot-dir")
    p.add_argument("--threads", type=int)
    p.add_argument("--no-timing", action="store_true",
                   help="record zero wall times and omit the host line for byte-stable output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect-tree", help="list the TEP tree in preorder")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_inspect_tree)

    p = sub.add_parser("describe-model", help="print a checkpoint's architecture")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_describe_model)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
