"""
Mobility-adjusted BFT quorum arithmetic.

With f faulty nodes and net churn δ_N (legitimate) and δ_f (faulty) over the
observation window, a consensus needs at least ``3f - δ_N + δ_f + 1`` nodes.
At zero churn this is the classic ``3f + 1`` threshold.

When f is Poisson and the churn terms are differences of Poisson counts, the
required count has mean ``3λ_f - λ_δN + λ_δf + 1`` but is not itself Poisson:
the churn terms are Skellam, so the law is overdispersed. The sampling and
dispersion helpers here make that visible instead of assuming it away.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.churn import sample_churn_deltas
from src.errors import InsufficientDataError, ParameterDomainError
from src.spatial import Region, sample_snapshot, snapshot_counts

logger = logging.getLogger(__name__)

QUORUM_COLUMNS = ["trial", "f", "delta_N", "delta_f", "n_min"]

ChurnMeans = Tuple[float, float]


@dataclass(frozen=True)
class QuorumInput:
    faulty: int
    delta_legit: int = 0
    delta_faulty: int = 0

    def __post_init__(self):
        if self.faulty < 0:
            raise ParameterDomainError(f"faulty must be non-negative, got {self.faulty}")


@dataclass(frozen=True)
class QuorumRequirement:
    n_min: int


@dataclass(frozen=True)
class QuorumSample:
    """One draw of the required-node law."""
    faulty: int
    delta_legit: int
    delta_faulty: int
    n_min: int


def required_nodes(quorum_input: QuorumInput) -> QuorumRequirement:
    """
    Minimum node count for a BFT consensus under churn.

    The strict inequality ``N > 3f - δ_N + δ_f + 1`` is read as ``>=`` so the
    zero-churn case is exactly ``3f + 1``. Results below one clamp to one.
    """
    raw = 3 * quorum_input.faulty - quorum_input.delta_legit + quorum_input.delta_faulty + 1
    return QuorumRequirement(n_min=max(1, raw))


def is_bft_feasible(total: int, faulty: int) -> bool:
    """True iff ``total >= 3 * faulty + 1``."""
    if total < 0 or faulty < 0:
        raise ParameterDomainError(f"counts must be non-negative, got total={total}, faulty={faulty}")
    if faulty > total:
        raise ParameterDomainError(f"faulty ({faulty}) exceeds total ({total})")
    return total >= 3 * faulty + 1


def required_node_intensity(faulty_mean: float, legit_net_mean: float, faulty_net_mean: float) -> float:
    """Closed-form intensity ``3λ_f - λ_δN + λ_δf`` (mean of n_min minus one)."""
    return 3.0 * faulty_mean - legit_net_mean + faulty_net_mean


def exact_moments(
    faulty_mean: float,
    legit_churn: ChurnMeans,
    faulty_churn: ChurnMeans
) -> Tuple[float, float]:
    """
    Mean and variance of ``n_min - 1`` before clamping.

    The variance is ``9λ_f`` plus the sum of all four churn means, since
    each Skellam term contributes the sum of its two Poisson means.
    """
    legit_net = legit_churn[0] - legit_churn[1]
    faulty_net = faulty_churn[0] - faulty_churn[1]
    mean = required_node_intensity(faulty_mean, legit_net, faulty_net)
    variance = 9.0 * faulty_mean + sum(legit_churn) + sum(faulty_churn)
    return mean, variance


def sample_quorum_law(
    faulty_mean: float,
    legit_churn: ChurnMeans,
    faulty_churn: ChurnMeans,
    trials: int,
    rng: np.random.Generator
) -> List[QuorumSample]:
    """
    Draw f, δ_N and δ_f per trial and evaluate the quorum rule.

    Args:
        faulty_mean: Poisson mean of the faulty count (p_f * λ_N)
        legit_churn: (arrival_mean, departure_mean) of legitimate nodes
        faulty_churn: (arrival_mean, departure_mean) of faulty nodes
        trials: Number of draws
        rng: Caller-owned random generator

    Returns:
        One QuorumSample per trial
    """
    if trials < 1:
        raise ParameterDomainError(f"trials must be at least 1, got {trials}")
    if faulty_mean < 0:
        raise ParameterDomainError(f"faulty_mean must be non-negative, got {faulty_mean}")

    faulty = rng.poisson(faulty_mean, trials)
    _, _, delta_legit = sample_churn_deltas(legit_churn[0], legit_churn[1], trials, rng)
    _, _, delta_faulty = sample_churn_deltas(faulty_churn[0], faulty_churn[1], trials, rng)
    n_min = np.maximum(1, 3 * faulty - delta_legit + delta_faulty + 1)

    return [
        QuorumSample(int(f), int(dn), int(df), int(n))
        for f, dn, df, n in zip(faulty, delta_legit, delta_faulty, n_min)
    ]


def sample_required_nodes(
    faulty_mean: float,
    legit_churn: ChurnMeans,
    faulty_churn: ChurnMeans,
    trials: int,
    rng: np.random.Generator
) -> List[int]:
    """n_min values of ``sample_quorum_law``."""
    samples = sample_quorum_law(faulty_mean, legit_churn, faulty_churn, trials, rng)
    return [sample.n_min for sample in samples]


def dispersion_diagnostic(samples: Sequence[float]) -> Tuple[float, float, float]:
    """
    Return (mean, unbiased variance, variance/mean).

    The index is 1 for Poisson data; values above 1 indicate overdispersion.
    A zero mean reports an index of 0 for constant samples and infinity
    otherwise.
    """
    if len(samples) < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {len(samples)}")
    values = np.asarray(samples, dtype=float)
    mean = float(values.mean())
    variance = float(values.var(ddof=1))
    if mean == 0.0:
        return mean, variance, 0.0 if variance == 0.0 else math.inf
    return mean, variance, variance / mean


def estimate_feasibility(
    intensity: float,
    fault_prob: float,
    trials: int,
    rng: np.random.Generator,
    region: Region = Region(1.0)
) -> float:
    """Fraction of PPP drops that satisfy ``total >= 3 * faulty + 1``."""
    if trials < 1:
        raise ParameterDomainError(f"trials must be at least 1, got {trials}")
    feasible = 0
    for _ in range(trials):
        total, faulty = snapshot_counts(sample_snapshot(intensity, fault_prob, region, rng))
        feasible += is_bft_feasible(total, faulty)
    return feasible / trials


def quorum_samples_to_frame(samples: Sequence[QuorumSample]) -> pd.DataFrame:
    """Tabulate samples as ``trial,f,delta_N,delta_f,n_min``."""
    rows = [
        (trial, s.faulty, s.delta_legit, s.delta_faulty, s.n_min)
        for trial, s in enumerate(samples)
    ]
    return pd.DataFrame(rows, columns=QUORUM_COLUMNS)
