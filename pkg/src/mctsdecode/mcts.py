"""Training-time Monte Carlo tree search over the TEP tree.

Each node stores visit counts, max-backed action values and cached policy
priors. The reward of a newly expanded node is +100 when the target TEP is
in its subtree and minus the candidate's Euclidean distance otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .channel import hard_decision, squared_distance_metric
from .gf2 import encode_packed
from .teptree import ADJACENT, EXTEND, TreeParams, legal_actions, reachable, tep_string

TARGET_REWARD = 100.0
C_PUCT = 1.38

TARGET_FOUND = "target-found"
BUDGET_EXHAUSTED = "budget-exhausted"
DEAD_END = "dead-end"
EXPANDED = "expanded"


class SearchNode:
    __slots__ = ("tep", "word", "visits", "n_sa", "q", "prior", "children", "legal", "_dist")

    def __init__(self, tep, word: int, legal: tuple[bool, bool]):
        self.tep = tep
        self.word = word
        self.visits = 1
        self.n_sa = [0, 0]
        self.q = [0.0, 0.0]
        self.prior = None
        self.children = [None, None]
        self.legal = legal
        self._dist = None

    @property
    def n_legal(self) -> int:
        return self.legal[0] + self.legal[1]


class SearchContext:
    """Everything an episode needs about one received frame.

    ``word0`` is the packed re-encoding of the hard-decided information bits,
    ``rows`` the packed generator rows, ``metric`` maps a packed codeword to
    its squared distance from the received vector, ``policy`` supplies the
    extend/adjacent logit gap (``None`` means uniform priors). ``prior_mix``
    blends network priors with the uniform pair, which keeps a confident
    policy from starving one action of visits during training searches.
    """

    def __init__(self, params: TreeParams, rows, word0: int, metric, policy=None,
                 c_puct: float = C_PUCT, strict_reachability: bool = False,
                 prior_mix: float = 0.0):
        if not 0.0 <= prior_mix <= 1.0:
            raise ValueError(f"prior_mix must lie in [0, 1], got {prior_mix}")
        self.params = params
        self.prior_mix = prior_mix
        self.strict = strict_reachability
        self.rows = rows
        self.word0 = word0
        self.metric = metric
        self.policy = policy
        self.c_puct = c_puct
        self.network_calls = 0

    def distance(self, node: SearchNode) -> float:
        if node._dist is None:
            node._dist = sqrt(max(self.metric.value(node.word), 0.0))
        return node._dist

    def ensure_priors(self, node: SearchNode) -> None:
        if node.prior is not None:
            return
        ext, adj = node.legal
        if ext and adj:
            if self.policy is None:
                node.prior = (0.5, 0.5)
            else:
                self.network_calls += 1
                p_ext, _ = self.policy.priors(node.tep, node.word, self.distance(node))
                if self.prior_mix:
                    p_ext = (1.0 - self.prior_mix) * p_ext + 0.5 * self.prior_mix
                node.prior = (p_ext, 1.0 - p_ext)
        else:
            node.prior = (1.0 if ext else 0.0, 1.0 if adj else 0.0)


@dataclass
class SearchTree:
    context: SearchContext
    nodes: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.context.params
        self.root = SearchNode((), self.context.word0, legal_actions((), p))
        self.nodes[()] = self.root

    def expand(self, node: SearchNode, action: int) -> SearchNode:
        ctx = self.context
        k = ctx.params.k
        if action == EXTEND:
            tep = node.tep + (k,)
            word = node.word ^ ctx.rows[k - 1]
        else:
            z = node.tep[-1]
            tep = node.tep[:-1] + (z - 1,)
            word = node.word ^ ctx.rows[z - 1] ^ ctx.rows[z - 2]
        child = SearchNode(tep, word, legal_actions(tep, ctx.params))
        node.children[action] = child
        node.n_sa[action] = 0
        node.q[action] = 0.0
        self.nodes[tep] = child
        return child


@dataclass
class EpisodeOutcome:
    status: str
    steps: int
    expansions: int


def puct_score(node: SearchNode, action: int, c_puct: float = C_PUCT) -> float:
    if not node.legal[action]:
        raise ValueError(f"action {action} is illegal at {node.tep}")
    prior = node.prior[action] if node.prior is not None else 0.5
    return node.q[action] + c_puct * prior * sqrt(node.visits) / (1 + node.n_sa[action])


def select_action(node: SearchNode, c_puct: float = C_PUCT) -> int | None:
    """PUCT argmax over legal actions; ties go to extend. ``None`` at a leaf."""
    ext, adj = node.legal
    if ext and adj:
        if puct_score(node, ADJACENT, c_puct) > puct_score(node, EXTEND, c_puct):
            return ADJACENT
        return EXTEND
    if ext:
        return EXTEND
    if adj:
        return ADJACENT
    return None


def evaluate_reward(new_tep, target, distance: float) -> float:
    if reachable(new_tep, target):
        return TARGET_REWARD
    return -distance


def backpropagate(trajectory, reward: float) -> None:
    for node, action in trajectory:
        node.visits += 1
        node.n_sa[action] += 1
        if reward > node.q[action]:
            node.q[action] = reward


def run_episode(tree: SearchTree, target, max_steps: int, classic: bool = False,
                trace=None, episode: int = 0) -> EpisodeOutcome:
    """One descent from the root.

    By default the descent keeps going through each freshly expanded node
    until the target, a leaf or the step budget is hit. ``classic=True``
    stops right after the first expansion.
    """
    ctx = tree.context
    c_puct = ctx.c_puct
    node = tree.root
    trajectory = []
    expansions = 0
    for t in range(max_steps + 1):
        if node.tep == target:
            return EpisodeOutcome(TARGET_FOUND, t, expansions)
        if t == max_steps:
            return EpisodeOutcome(BUDGET_EXHAUSTED, t, expansions)
        ctx.ensure_priors(node)
        action = select_action(node, c_puct)
        if action is None:
            return EpisodeOutcome(DEAD_END, t, expansions)
        trajectory.append((node, action))
        child = node.children[action]
        if child is None:
            child = tree.expand(node, action)
            expansions += 1
            reward = TARGET_REWARD if reachable(child.tep, target, strict=ctx.strict) else -ctx.distance(child)
            backpropagate(trajectory, reward)
            if trace is not None:
                trace.append(f"{episode} {t} {tep_string(child.tep, ctx.params.k)} {reward:.6g}")
            if classic:
                status = TARGET_FOUND if child.tep == target else EXPANDED
                return EpisodeOutcome(status, t + 1, expansions)
        node = child
    raise AssertionError("unreachable")


@dataclass
class SearchResult:
    tree: SearchTree
    episodes_run: int
    first_found: int | None
    expansions: int


def run_search(tree: SearchTree, target, episodes: int, max_steps: int,
               classic: bool = False, trace=None) -> SearchResult:
    """Up to ``episodes`` episodes on one tree.

    An episode that expands nothing leaves every statistic unchanged, so all
    later episodes would repeat it exactly; the loop stops there.
    """
    target = tuple(target)
    first_found = None
    expansions = 0
    run = 0
    for q in range(episodes):
        out = run_episode(tree, target, max_steps, classic, trace, q)
        run += 1
        expansions += out.expansions
        if out.status == TARGET_FOUND and first_found is None:
            first_found = q + 1
        if out.expansions == 0:
            break
    return SearchResult(tree, run, first_found, expansions)


def visit_distributions(tree: SearchTree, target=None) -> list[tuple[SearchNode, tuple[float, float]]]:
    """Normalized action visit counts at every visited two-action state.

    Single-action states carry no choice and are left out. With ``target``
    given, only states on the root-to-target path count, and nothing is
    returned unless the search actually reached the target.
    """
    if target is not None:
        target = tuple(target)
        if target not in tree.nodes:
            return []
    out = []
    for node in tree.nodes.values():
        if not (node.legal[0] and node.legal[1]):
            continue
        if target is not None and (node.tep == target or not reachable(node.tep, target)):
            continue
        total = node.n_sa[0] + node.n_sa[1]
        if total == 0:
            continue
        p_ext = node.n_sa[0] / total
        out.append((node, (p_ext, 1.0 - p_ext)))
    return out


def conservation_holds(tree: SearchTree) -> bool:
    return all(node.visits == 1 + node.n_sa[0] + node.n_sa[1] for node in tree.nodes.values())


def make_context(code, received, params: TreeParams, policy=None, c_puct: float = C_PUCT,
                 prior_mix: float = 0.0) -> SearchContext:
    """Context from the received vector: hard-decide the first ``k`` positions."""
    received = np.asarray(received, dtype=np.float64)
    b0 = hard_decision(received[:code.k])
    return SearchContext(params, code.packed_rows, encode_packed(code, b0),
                         squared_distance_metric(received), policy, c_puct,
                         prior_mix=prior_mix)
