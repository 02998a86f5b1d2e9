"""Policy-guided Monte-Carlo tree search decoding of short binary linear codes."""

from .channel import ReceivedFrame, frame_stream, make_rng, simulate, snr_to_sigma
from .decoders import (
    DECODERS, DecodeOutcome, StoppingRule, decode, mcts_decode, mld_exhaustive, non_ge_osd_decode,
    osd_decode,
)
from .gf2 import LinearCode, build_code, load_code, min_distance_bruteforce, save_code
from .mcts import SearchTree, make_context, run_search, visit_distributions
from .policy import PolicyModel, init_model, load_checkpoint, save_checkpoint
from .teptree import TreeParams, depth_of, enumerate_all, max_depth, reachable
from .trainer import TrainConfig, Trainer, evaluate_policy, preset, train

__version__ = "0.1.0"

__all__ = [
    "DECODERS", "DecodeOutcome", "LinearCode", "PolicyModel", "ReceivedFrame", "SearchTree",
    "StoppingRule", "TrainConfig", "Trainer", "TreeParams", "build_code", "decode", "depth_of",
    "enumerate_all", "evaluate_policy", "frame_stream", "init_model", "load_checkpoint", "load_code",
    "make_context", "make_rng", "max_depth", "mcts_decode", "min_distance_bruteforce",
    "mld_exhaustive", "non_ge_osd_decode", "osd_decode", "preset", "reachable", "run_search",
    "save_checkpoint", "save_code", "simulate", "snr_to_sigma", "train", "visit_distributions",
]
