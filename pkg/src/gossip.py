"""
Block dissemination via gossip.

The mean-field model tracks the uninformed fraction ``r_bar``. It starts at
``r_bar_0 = p_f`` and shrinks each slot by ``p_f ** (N * (1 - p_f))``: an
uninformed node stays uninformed only if every capable sender fails to
reach it. Consensus latency is the first slot with ``r_bar_t <= epsilon``.

Since ``r_bar_t = p_f ** (1 + t * N * (1 - p_f))`` the latency also has a
closed form, used by the Monte Carlo experiments. An agent-based engine
simulates individual nodes to cross-check the recurrence.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import DEFAULT_EPSILON, DEFAULT_MAX_SLOTS
from src.errors import ParameterDomainError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "r", "r_bar"]


class SenderPolicy(Enum):
    """Who may relay a block in the agent-based engine."""
    ALL_CAPABLE = "all-capable"      # every capable node, as in the mean-field model
    INFORMED_ONLY = "informed-only"  # only capable nodes that already hold the block


@dataclass(frozen=True)
class GossipParams:
    n_total: int
    fault_prob: float
    epsilon: float = DEFAULT_EPSILON
    max_slots: int = DEFAULT_MAX_SLOTS

    def __post_init__(self):
        if self.n_total < 1:
            raise ParameterDomainError(f"n_total must be at least 1, got {self.n_total}")
        if not 0.0 <= self.fault_prob <= 1.0:
            raise ParameterDomainError(f"fault_prob must lie in [0, 1], got {self.fault_prob}")
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterDomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_slots < 1:
            raise ParameterDomainError(f"max_slots must be at least 1, got {self.max_slots}")

    @property
    def sender_exponent(self) -> float:
        """Real-valued count of capable senders, ``N * (1 - p_f)``."""
        return self.n_total * (1.0 - self.fault_prob)


@dataclass
class GossipTrace:
    """
    Per-slot dissemination state from t = 0.

    The uninformed fraction is stored; the informed fraction is derived so
    tiny r_bar values keep full precision. ``latency_slots`` is None if the
    trace did not converge.
    """
    uninformed: List[float] = field(default_factory=list)
    latency_slots: Optional[int] = None

    @property
    def informed(self) -> List[float]:
        return [1.0 - u for u in self.uninformed]

    @property
    def converged(self) -> bool:
        return self.latency_slots is not None


def mean_field_trace(params: GossipParams) -> GossipTrace:
    """
    Iterate the uninformed-fraction recurrence until convergence.

    Args:
        params: Network size, fault probability, threshold and horizon

    Returns:
        GossipTrace whose last entry is the converging slot, or a trace of
        ``max_slots + 1`` entries with ``latency_slots=None``
    """
    decay = params.fault_prob ** params.sender_exponent
    r_bar = params.fault_prob
    uninformed = [r_bar]
    latency: Optional[int] = 0 if r_bar <= params.epsilon else None

    t = 0
    while latency is None and t < params.max_slots:
        t += 1
        r_bar = r_bar * decay
        uninformed.append(r_bar)
        if r_bar <= params.epsilon:
            latency = t

    if latency is None:
        logger.warning(
            f"Mean-field gossip did not converge within {params.max_slots} slots "
            f"(N={params.n_total}, p_f={params.fault_prob})"
        )
    return GossipTrace(uninformed=uninformed, latency_slots=latency)


def latency_closed_form(params: GossipParams) -> Optional[int]:
    """
    Closed-form consensus latency in slots.

    Solves ``p_f ** (1 + t * N * (1 - p_f)) <= epsilon`` for the smallest
    integer t. Returns None when ``p_f == 1`` or when t exceeds ``max_slots``.
    """
    p = params.fault_prob
    if p <= params.epsilon:
        return 0
    if p >= 1.0:
        return None
    slots = math.ceil((math.log(params.epsilon) / math.log(p) - 1.0) / params.sender_exponent)
    slots = max(slots, 0)
    return slots if slots <= params.max_slots else None


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def agent_based_trace(
    params: GossipParams,
    sender_policy: SenderPolicy,
    rng: np.random.Generator
) -> GossipTrace:
    """
    Simulate gossip node by node.

    Each node starts informed with probability ``1 - p_f``. The capable
    sender count is ``round_half_up(N * (1 - p_f))``; per slot an uninformed
    node stays uninformed with probability ``p_f ** S``, where S is that
    count (ALL_CAPABLE) or the informed nodes capped at that count
    (INFORMED_ONLY). Rounding S makes small networks deviate slightly from
    the mean-field exponent.

    Args:
        params: Network size, fault probability, threshold and horizon
        sender_policy: Sender rule
        rng: Caller-owned random generator, one per invocation

    Returns:
        GossipTrace of realized fractions
    """
    n = params.n_total
    p = params.fault_prob
    capable = round_half_up(params.sender_exponent)

    informed = rng.random(n) < (1.0 - p)
    fractions = [float((~informed).sum() / n)]
    latency: Optional[int] = 0 if fractions[0] <= params.epsilon else None

    t = 0
    while latency is None and t < params.max_slots:
        t += 1
        if sender_policy is SenderPolicy.ALL_CAPABLE:
            senders = capable
        else:
            senders = min(int(informed.sum()), capable)
        survival = p ** senders
        waiting = np.flatnonzero(~informed)
        reached = rng.random(waiting.size) >= survival
        informed[waiting[reached]] = True
        fractions.append(float((~informed).sum() / n))
        if fractions[-1] <= params.epsilon:
            latency = t

    logger.debug(f"Agent gossip N={n} p_f={p} policy={sender_policy.value}: latency {latency}")
    return GossipTrace(uninformed=fractions, latency_slots=latency)


def latency_table(
    n_values: Sequence[int],
    fault_probs: Sequence[float],
    epsilon: float = DEFAULT_EPSILON
) -> Dict[Tuple[int, float], Optional[int]]:
    """Closed-form latency for every (N, p_f) pair."""
    return {
        (n, p): latency_closed_form(GossipParams(n_total=n, fault_prob=p, epsilon=epsilon))
        for p in fault_probs
        for n in n_values
    }


def trace_to_frame(trace: GossipTrace) -> pd.DataFrame:
    """Tabulate a trace as ``t,r,r_bar``."""
    rows = [(t, 1.0 - r_bar, r_bar) for t, r_bar in enumerate(trace.uninformed)]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)
