"""
Monte Carlo experiments combining churn, quorum and gossip.

Per trial the baseline node count N is Poisson conditioned on N >= 3f + 1,
legitimate and faulty churn are drawn in count mode, and the effective
network ``N_eff = N + δ_N + δ_f``, ``f_eff = max(0, f + δ_f)`` either fails
the BFT condition or disseminates with fault probability ``f_eff / N_eff``.
Each trial owns a generator seeded from (scenario seed, trial index), so
outcomes do not depend on worker count or completion order.
"""

import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats
from tqdm import tqdm

from config import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_SLOTS,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    REJECTION_ACCEPTANCE_FLOOR,
    SLOT_PROFILES_MS,
)
from src.churn import sample_churn_delta
from src.errors import ParameterDomainError, ScenarioDegenerateError
from src.gossip import GossipParams, GossipTrace, latency_closed_form, mean_field_trace
from src.quorum import is_bft_feasible

logger = logging.getLogger(__name__)

TRIAL_LOG_COLUMNS = ["trial", "N", "f", "delta_N", "delta_f", "N_eff", "f_eff", "latency_slots"]
SUMMARY_COLUMNS = [
    "scenario", "trials", "converged", "infeasible", "nonconvergent",
    "median_latency", "mean_latency",
]

ChurnMeans = Tuple[float, float]


class TrialStatus(Enum):
    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    NONCONVERGENT = "nonconvergent"


class SlotProfile(Enum):
    """Radio profiles and their inter-message period in milliseconds."""
    CV2X_50 = "CV2X_50"
    CV2X_100 = "CV2X_100"
    CV2X_200 = "CV2X_200"
    DSRC_100 = "DSRC_100"

    @property
    def slot_ms(self) -> float:
        return SLOT_PROFILES_MS[self.value]


class BaselineSampling(Enum):
    FIXED = "fixed"
    REJECTION = "rejection"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class Scenario:
    """
    One latency experiment.

    ``fixed_n`` replaces the Poisson baseline count with a constant, which
    removes all randomness when churn is zero.

    A sampled baseline is degenerate only when ``P(N >= 3f + 1)`` is exactly
    zero. Tiny tails such as ``P(Poisson(25) >= 55)``, about 1.5e-7, are
    drawn from the truncated tail instead of being rejected, so there is no
    acceptance cut-off above zero.
    """
    name: str
    base_intensity: float
    base_faulty: int
    legit_churn: ChurnMeans = (0.0, 0.0)
    faulty_churn: ChurnMeans = (0.0, 0.0)
    epsilon: float = DEFAULT_EPSILON
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    fixed_n: Optional[int] = None
    max_slots: int = DEFAULT_MAX_SLOTS

    def __post_init__(self):
        if self.base_intensity < 0:
            raise ParameterDomainError(f"base_intensity must be non-negative, got {self.base_intensity}")
        if self.base_faulty < 0:
            raise ParameterDomainError(f"base_faulty must be non-negative, got {self.base_faulty}")
        if self.trials < 1:
            raise ParameterDomainError(f"trials must be at least 1, got {self.trials}")
        if min(self.legit_churn) < 0 or min(self.faulty_churn) < 0:
            raise ParameterDomainError("churn means must be non-negative")
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterDomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.fixed_n is not None and self.fixed_n < 1:
            raise ParameterDomainError(f"fixed_n must be at least 1, got {self.fixed_n}")

    @property
    def min_baseline(self) -> int:
        return 3 * self.base_faulty + 1


@dataclass(frozen=True)
class TrialRecord:
    """Replayable per-trial log entry; ``resamples`` counts rejected baseline draws."""
    trial: int
    n: int
    faulty: int
    delta_legit: int
    delta_faulty: int
    n_eff: int
    f_eff: int
    latency: Optional[int]
    status: TrialStatus
    resamples: int = 0


@dataclass
class ScenarioOutcome:
    latencies: List[int] = field(default_factory=list)
    infeasible_trials: int = 0
    nonconvergent_trials: int = 0
    per_trial_log: List[TrialRecord] = field(default_factory=list)

    @property
    def converged_trials(self) -> int:
        return len(self.latencies)

    @property
    def trials(self) -> int:
        return self.converged_trials + self.infeasible_trials + self.nonconvergent_trials

    @property
    def median_latency(self) -> Optional[float]:
        return float(statistics.median(self.latencies)) if self.latencies else None

    @property
    def mean_latency(self) -> Optional[float]:
        return float(statistics.fmean(self.latencies)) if self.latencies else None


@dataclass
class BaselineSampler:
    """
    Draws the baseline count N conditioned on N >= 3f + 1.

    In truncated mode ``tail_cdf[k]`` is P(N <= floor + k | N >= floor),
    built once per scenario from log-space Poisson masses.
    """
    mode: BaselineSampling
    floor: int
    intensity: float
    fixed_n: Optional[int] = None
    acceptance: float = 1.0
    tail_cdf: Optional[np.ndarray] = None

    def draw(self, rng: np.random.Generator) -> Tuple[int, int]:
        """Return (N, rejected draws)."""
        if self.mode is BaselineSampling.FIXED:
            return self.fixed_n, 0
        if self.mode is BaselineSampling.REJECTION:
            rejected = 0
            while True:
                n = int(rng.poisson(self.intensity))
                if n >= self.floor:
                    return n, rejected
                rejected += 1
        index = int(np.searchsorted(self.tail_cdf, rng.random(), side="right"))
        return self.floor + min(index, len(self.tail_cdf) - 1), 0


def _tail_cdf(floor: int, intensity: float, log_acceptance: float) -> np.ndarray:
    span = int(10 * np.sqrt(max(intensity, floor))) + 50
    ks = np.arange(floor, floor + span)
    masses = np.exp(scipy.stats.poisson.logpmf(ks, intensity) - log_acceptance)
    cdf = np.cumsum(masses)
    return cdf / cdf[-1]


def build_baseline_sampler(scenario: Scenario) -> BaselineSampler:
    """
    Pick how to draw N >= 3f + 1 for a scenario.

    Raises:
        ScenarioDegenerateError: If a fixed N is below 3f + 1 or the
            conditioning event has zero probability
    """
    floor = scenario.min_baseline
    if scenario.fixed_n is not None:
        if scenario.fixed_n < floor:
            raise ScenarioDegenerateError(
                f"{scenario.name}: fixed N={scenario.fixed_n} is below 3f+1={floor}"
            )
        return BaselineSampler(BaselineSampling.FIXED, floor, scenario.base_intensity, fixed_n=scenario.fixed_n)

    log_acceptance = float(scipy.stats.poisson.logsf(floor - 1, scenario.base_intensity))
    if not np.isfinite(log_acceptance):
        raise ScenarioDegenerateError(
            f"{scenario.name}: P(N >= {floor}) is zero at intensity {scenario.base_intensity}"
        )
    acceptance = float(np.exp(log_acceptance))
    if acceptance >= REJECTION_ACCEPTANCE_FLOOR:
        return BaselineSampler(BaselineSampling.REJECTION, floor, scenario.base_intensity, acceptance=acceptance)

    logger.warning(
        f"{scenario.name}: P(N >= {floor}) = {acceptance:.3e}; "
        f"sampling the truncated Poisson tail directly"
    )
    return BaselineSampler(
        BaselineSampling.TRUNCATED,
        floor,
        scenario.base_intensity,
        acceptance=acceptance,
        tail_cdf=_tail_cdf(floor, scenario.base_intensity, log_acceptance),
    )


def evaluate_trial(
    trial: int,
    n: int,
    faulty: int,
    delta_legit: int,
    delta_faulty: int,
    epsilon: float,
    max_slots: int = DEFAULT_MAX_SLOTS,
    resamples: int = 0
) -> TrialRecord:
    """Apply churn to a baseline network and compute its latency, if any."""
    n_eff = n + delta_legit + delta_faulty
    f_eff = max(0, faulty + delta_faulty)

    if n_eff <= f_eff or not is_bft_feasible(n_eff, f_eff):
        return TrialRecord(trial, n, faulty, delta_legit, delta_faulty, n_eff, f_eff,
                           None, TrialStatus.INFEASIBLE, resamples)

    params = GossipParams(n_total=n_eff, fault_prob=f_eff / n_eff, epsilon=epsilon, max_slots=max_slots)
    latency = latency_closed_form(params)
    status = TrialStatus.CONVERGED if latency is not None else TrialStatus.NONCONVERGENT
    return TrialRecord(trial, n, faulty, delta_legit, delta_faulty, n_eff, f_eff,
                       latency, status, resamples)


def run_trial(scenario: Scenario, trial: int, sampler: Optional[BaselineSampler] = None) -> TrialRecord:
    """Run one trial on its own (seed, trial) generator."""
    sampler = sampler or build_baseline_sampler(scenario)
    rng = np.random.default_rng([scenario.seed, trial])
    n, resamples = sampler.draw(rng)
    legit = sample_churn_delta(*scenario.legit_churn, rng)
    faulty = sample_churn_delta(*scenario.faulty_churn, rng)
    record = evaluate_trial(trial, n, scenario.base_faulty, legit.net, faulty.net,
                            scenario.epsilon, scenario.max_slots, resamples)
    if resamples:
        logger.debug(f"{scenario.name} trial {trial}: {resamples} baseline resamples")
    return record


def _run_trial_block(
    scenario: Scenario,
    start: int,
    stop: int,
    sampler: BaselineSampler
) -> List[TrialRecord]:
    return [run_trial(scenario, trial, sampler) for trial in range(start, stop)]


def aggregate(records: Sequence[TrialRecord]) -> ScenarioOutcome:
    """Build an outcome from trial records in trial order."""
    outcome = ScenarioOutcome()
    for record in sorted(records, key=lambda r: r.trial):
        outcome.per_trial_log.append(record)
        if record.status is TrialStatus.CONVERGED:
            outcome.latencies.append(record.latency)
        elif record.status is TrialStatus.INFEASIBLE:
            outcome.infeasible_trials += 1
        else:
            outcome.nonconvergent_trials += 1
    return outcome


class ExperimentRunner:
    """Runs latency scenarios serially or across worker processes."""

    def __init__(self, workers: int = 1, progress: bool = False, block_size: int = 1000):
        """
        Args:
            workers: Number of worker processes (1 runs in-process)
            progress: Show a tqdm progress bar
            block_size: Trials per worker task
        """
        if workers < 1:
            raise ParameterDomainError(f"workers must be at least 1, got {workers}")
        self.workers = workers
        self.progress = progress
        self.block_size = max(1, block_size)

    def run_latency_mc(self, scenario: Scenario) -> ScenarioOutcome:
        """
        Run every trial of a scenario.

        Raises:
            ScenarioDegenerateError: If N >= 3f + 1 cannot be met
        """
        sampler = build_baseline_sampler(scenario)
        logger.info(
            f"Running {scenario.name}: {scenario.trials} trials, intensity {scenario.base_intensity}, "
            f"f={scenario.base_faulty}, baseline {sampler.mode.value} (acceptance {sampler.acceptance:.3g})"
        )

        blocks = [
            (start, min(start + self.block_size, scenario.trials))
            for start in range(0, scenario.trials, self.block_size)
        ]
        records: List[TrialRecord] = []

        if self.workers == 1:
            for start, stop in tqdm(blocks, desc=scenario.name, disable=not self.progress):
                records.extend(_run_trial_block(scenario, start, stop, sampler))
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                futures = [
                    pool.submit(_run_trial_block, scenario, start, stop, sampler)
                    for start, stop in blocks
                ]
                for future in tqdm(futures, desc=scenario.name, disable=not self.progress):
                    records.extend(future.result())

        outcome = aggregate(records)
        logger.info(
            f"{scenario.name}: {outcome.converged_trials} converged, "
            f"{outcome.infeasible_trials} infeasible, {outcome.nonconvergent_trials} nonconvergent"
        )
        return outcome


def create_experiment_runner(workers: int = 1, progress: bool = False) -> ExperimentRunner:
    """Factory function to create an experiment runner."""
    return ExperimentRunner(workers=workers, progress=progress)


def run_latency_mc(scenario: Scenario) -> ScenarioOutcome:
    """Serial convenience wrapper around ``ExperimentRunner.run_latency_mc``."""
    return ExperimentRunner().run_latency_mc(scenario)


def replay_latency(record: TrialRecord, epsilon: float, max_slots: int = DEFAULT_MAX_SLOTS) -> Optional[int]:
    """Recompute a logged trial's latency from its effective counts."""
    params = GossipParams(
        n_total=record.n_eff,
        fault_prob=record.f_eff / record.n_eff,
        epsilon=epsilon,
        max_slots=max_slots,
    )
    return latency_closed_form(params)


def dissemination_curves(
    n_values: Sequence[int],
    fault_prob: float,
    epsilon: float = DEFAULT_EPSILON,
    max_slots: int = DEFAULT_MAX_SLOTS
) -> List[GossipTrace]:
    """One mean-field trace per network size, each run to its own convergence slot."""
    return [
        mean_field_trace(GossipParams(n_total=n, fault_prob=fault_prob, epsilon=epsilon, max_slots=max_slots))
        for n in n_values
    ]


def slots_to_ms(latency_slots: int, profile: SlotProfile) -> float:
    """Convert a slot count to milliseconds under a radio profile."""
    if latency_slots < 0:
        raise ParameterDomainError(f"latency_slots must be non-negative, got {latency_slots}")
    return latency_slots * profile.slot_ms


def churn_scenarios(
    base_intensity: float = 25.0,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    favored_arrivals: float = 5.0,
    background: float = 1.0
) -> List[Scenario]:
    """
    The six latency-distribution scenarios: f in {6, 18} crossed with zero
    churn, legitimate-favoring churn and faulty-favoring churn.
    """
    churn_settings: Dict[str, Tuple[ChurnMeans, ChurnMeans]] = {
        "zero": ((0.0, 0.0), (0.0, 0.0)),
        "legit_favoring": ((favored_arrivals, background), (background, background)),
        "faulty_favoring": ((background, background), (favored_arrivals, background)),
    }
    scenarios = []
    for faulty in (6, 18):
        for label, (legit_churn, faulty_churn) in churn_settings.items():
            scenarios.append(Scenario(
                name=f"f{faulty}_{label}",
                base_intensity=base_intensity,
                base_faulty=faulty,
                legit_churn=legit_churn,
                faulty_churn=faulty_churn,
                trials=trials,
                seed=seed,
            ))
    return scenarios


def outcome_log_frame(outcome: ScenarioOutcome) -> pd.DataFrame:
    """Tabulate the trial log; latency is blank for infeasible and nonconvergent trials."""
    rows = [
        (r.trial, r.n, r.faulty, r.delta_legit, r.delta_faulty, r.n_eff, r.f_eff)
        for r in outcome.per_trial_log
    ]
    frame = pd.DataFrame(rows, columns=TRIAL_LOG_COLUMNS[:-1])
    frame["latency_slots"] = pd.array([r.latency for r in outcome.per_trial_log], dtype="Int64")
    return frame


def summarize_outcome(name: str, outcome: ScenarioOutcome) -> Dict[str, object]:
    return {
        "scenario": name,
        "trials": outcome.trials,
        "converged": outcome.converged_trials,
        "infeasible": outcome.infeasible_trials,
        "nonconvergent": outcome.nonconvergent_trials,
        "median_latency": outcome.median_latency,
        "mean_latency": outcome.mean_latency,
    }


def summary_frame(rows: Sequence[Dict[str, object]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=SUMMARY_COLUMNS)
