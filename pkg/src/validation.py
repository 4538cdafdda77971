"""
Invariant suite behind the ``validate`` command.

Each property is a gate: it passes or fails, with a detail line giving the
measured values. Statistical properties use fixed seeds, so a given suite
configuration always produces the same report.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np
import scipy.stats

from config import DEFAULT_EPSILON, DEFAULT_SEED
from src.churn import ChurnConfig, sample_churn_deltas, simulate_mm1_window
from src.experiments import (
    ExperimentRunner,
    Scenario,
    SlotProfile,
    outcome_log_frame,
    replay_latency,
    slots_to_ms,
)
from src.gossip import (
    GossipParams,
    SenderPolicy,
    agent_based_trace,
    latency_closed_form,
    latency_table,
    mean_field_trace,
)
from src.quorum import QuorumInput, dispersion_diagnostic, required_nodes, sample_required_nodes
from src.spatial import Region, role_counts_by_population, sample_snapshot
from src.stats import fit_beta_mom, ks_statistic, regularized_incomplete_beta

logger = logging.getLogger(__name__)

GRID_N = [1, 5, 45, 85, 125]
GRID_P = [0.1, 0.25, 0.5, 0.75, 0.9]


@dataclass
class PropertyResult:
    """Outcome of one invariant check"""
    name: str
    passed: bool
    detail: str = ""

    def __str__(self) -> str:
        mark = "✅" if self.passed else "❌"
        return f"  {mark} {self.name}: {self.detail}"


@dataclass
class ValidationReport:
    results: List[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Suite passes only if every property passes"""
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> List[PropertyResult]:
        return [result for result in self.results if not result.passed]

    def __str__(self) -> str:
        status = "✅ PASS" if self.passed else "❌ FAIL"
        lines = [f"Invariant suite: {status} ({len(self.results) - len(self.failures)}/{len(self.results)})"]
        lines.extend(str(result) for result in self.results)
        return "\n".join(lines)


@dataclass(frozen=True)
class SuiteSizes:
    """Sample sizes for the statistical properties."""
    spatial_seeds: int
    quorum_trials: int
    agent_runs: int
    latency_trials: int
    queue_runs: int
    churn_samples: int
    beta_points: int
    replay_trials: int


REDUCED_SIZES = SuiteSizes(
    spatial_seeds=10_000, quorum_trials=20_000, agent_runs=2_000,
    latency_trials=2_000, queue_runs=4_000, churn_samples=10_000,
    beta_points=10_000, replay_trials=500,
)
FULL_SIZES = SuiteSizes(
    spatial_seeds=10_000, quorum_trials=100_000, agent_runs=10_000,
    latency_trials=10_000, queue_runs=10_000, churn_samples=100_000,
    beta_points=10_000, replay_trials=2_000,
)


class InvariantValidator:
    """
    Runs every simulator property and collects a ValidationReport.
    """

    def __init__(self, full: bool = False, seed: int = DEFAULT_SEED):
        self.sizes = FULL_SIZES if full else REDUCED_SIZES
        self.seed = seed

    def _rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *stream])

    def checks(self) -> Dict[str, Callable[[], PropertyResult]]:
        return {
            "spatial_thinning": self.check_spatial_drops,
            "snapshot_determinism": self.check_snapshot_determinism,
            "quorum_reduction": self.check_quorum_reduction,
            "quorum_monotonicity": self.check_quorum_monotonicity,
            "quorum_mean_and_dispersion": self.check_quorum_law,
            "gossip_closed_form": self.check_gossip_closed_form,
            "mean_field_trace": self.check_mean_field_trace,
            "latency_monotonicity": self.check_latency_monotonicity,
            "agent_mean_field_agreement": self.check_agent_agreement,
            "latency_orderings": self.check_latency_orderings,
            "beta_fit_machinery": self.check_beta_machinery,
            "unit_conversion": self.check_unit_conversion,
            "departure_dispersion": self.check_departure_dispersion,
            "queue_arrival_rate": self.check_queue_arrival_rate,
            "churn_skellam_moments": self.check_skellam_moments,
            "churn_mode_agreement": self.check_churn_mode_agreement,
            "determinism_and_replay": self.check_determinism_and_replay,
        }

    def run(self) -> ValidationReport:
        report = ValidationReport()
        for name, check in self.checks().items():
            logger.info(f"Checking {name}...")
            try:
                result = check()
            except Exception as e:
                logger.error(f"{name} raised: {e}")
                result = PropertyResult(name, False, f"raised {type(e).__name__}: {e}")
            report.results.append(result)
        return report

    def check_spatial_drops(self) -> PropertyResult:
        rng = self._rng(1)
        region = Region(1.0)
        totals, legit_counts, faulty_counts, x_sum = [], [], [], 0.0
        for _ in range(self.sizes.spatial_seeds):
            snapshot = sample_snapshot(100.0, 0.25, region, rng)
            legit, faulty = role_counts_by_population(snapshot)
            totals.append(legit + faulty)
            legit_counts.append(legit)
            faulty_counts.append(faulty)
            x_sum += sum(node.x_m for node in snapshot.nodes)

        pooled = sum(totals)
        seeds = len(totals)
        fraction = sum(faulty_counts) / pooled
        fraction_ok = abs(fraction - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / pooled)
        _, _, index = dispersion_diagnostic(totals)
        index_ok = 0.95 <= index <= 1.05
        legit_mean, faulty_mean = np.mean(legit_counts), np.mean(faulty_counts)
        split_ok = (
            abs(legit_mean - 75.0) <= 3 * math.sqrt(75.0 / seeds)
            and abs(faulty_mean - 25.0) <= 3 * math.sqrt(25.0 / seeds)
        )
        x_mean = x_sum / pooled
        x_ok = abs(x_mean - 0.5) <= 3 / math.sqrt(12 * pooled)
        return PropertyResult(
            "spatial_thinning",
            fraction_ok and index_ok and split_ok and x_ok,
            f"faulty fraction {fraction:.4f}, count dispersion {index:.4f}, "
            f"legit/faulty means {legit_mean:.3f}/{faulty_mean:.3f}, mean x {x_mean:.4f}",
        )

    def check_snapshot_determinism(self) -> PropertyResult:
        region = Region(1.0)
        same = all(
            sample_snapshot(100.0, 0.25, region, self._rng(5, run))
            == sample_snapshot(100.0, 0.25, region, self._rng(5, run))
            for run in range(20)
        )
        all_faulty = sample_snapshot(50.0, 1.0, region, self._rng(6))
        none_faulty = sample_snapshot(50.0, 0.0, region, self._rng(6))
        roles_ok = (
            role_counts_by_population(all_faulty)[0] == 0
            and role_counts_by_population(none_faulty)[1] == 0
        )
        return PropertyResult(
            "snapshot_determinism",
            same and roles_ok,
            f"same seed same drop: {same}, p_f=1/0 roles pure: {roles_ok}",
        )

    def check_quorum_reduction(self) -> PropertyResult:
        wrong = [f for f in range(101) if required_nodes(QuorumInput(f)).n_min != 3 * f + 1]
        return PropertyResult("quorum_reduction", not wrong, f"mismatches at f={wrong}" if wrong else "3f+1 for f in [0, 100]")

    def check_quorum_monotonicity(self) -> PropertyResult:
        def n_min(faulty: int, delta_legit: int, delta_faulty: int) -> int:
            return required_nodes(QuorumInput(faulty, delta_legit, delta_faulty)).n_min

        violations = []
        for faulty in range(0, 21):
            for delta_legit in range(-10, 11):
                for delta_faulty in range(-10, 11):
                    current = n_min(faulty, delta_legit, delta_faulty)
                    if (
                        n_min(faulty + 1, delta_legit, delta_faulty) < current
                        or n_min(faulty, delta_legit, delta_faulty + 1) < current
                        or n_min(faulty, delta_legit + 1, delta_faulty) > current
                    ):
                        violations.append((faulty, delta_legit, delta_faulty))
        return PropertyResult(
            "quorum_monotonicity",
            not violations,
            f"violations at {violations[:5]}" if violations else "up in f and delta_f, down in delta_N",
        )

    def check_quorum_law(self) -> PropertyResult:
        trials = self.sizes.quorum_trials
        n_min = sample_required_nodes(25.0, (4.0, 2.0), (2.0, 1.0), trials, self._rng(2))
        mean, variance, _ = dispersion_diagnostic(n_min)
        mean_ok = abs(mean - 75.0) <= 3 * math.sqrt(variance / trials)
        _, _, index = dispersion_diagnostic([n - 1 for n in n_min])
        return PropertyResult(
            "quorum_mean_and_dispersion",
            mean_ok and index > 1.05,
            f"mean n_min {mean:.3f} (expected 75), dispersion index {index:.3f}",
        )

    def check_gossip_closed_form(self) -> PropertyResult:
        mismatches = []
        for n in GRID_N:
            for p in GRID_P:
                params = GossipParams(n_total=n, fault_prob=p, epsilon=DEFAULT_EPSILON)
                if latency_closed_form(params) != mean_field_trace(params).latency_slots:
                    mismatches.append((n, p))
        spot = (
            latency_closed_form(GossipParams(5, 0.5)),
            latency_closed_form(GossipParams(5, 0.25)),
        )
        return PropertyResult(
            "gossip_closed_form",
            not mismatches and spot == (7, 2),
            f"grid mismatches {mismatches}, T(5,0.5)={spot[0]}, T(5,0.25)={spot[1]}",
        )

    def check_mean_field_trace(self) -> PropertyResult:
        bad = []
        for n in GRID_N:
            for p in GRID_P:
                params = GossipParams(n_total=n, fault_prob=p, epsilon=DEFAULT_EPSILON)
                trace = mean_field_trace(params)
                decay = p ** params.sender_exponent
                r_bar = trace.uninformed
                steps_ok = all(r_bar[t] * decay == r_bar[t + 1] for t in range(len(r_bar) - 1))
                last = trace.latency_slots
                stop_ok = (
                    last is not None
                    and r_bar[last] <= params.epsilon
                    and all(value > params.epsilon for value in r_bar[:last])
                )
                if r_bar[0] != p or not steps_ok or not stop_ok:
                    bad.append((n, p))
        return PropertyResult(
            "mean_field_trace",
            not bad,
            f"bad traces {bad}" if bad else "r_bar_0 = p_f, constant decay, first slot below epsilon",
        )

    def check_latency_monotonicity(self) -> PropertyResult:
        table = latency_table(GRID_N, GRID_P, DEFAULT_EPSILON)
        violations = []
        for p in GRID_P:
            row = [table[(n, p)] for n in GRID_N]
            violations.extend(("N", p) for a, b in zip(row, row[1:]) if b > a)
        for n in GRID_N:
            column = [table[(n, p)] for p in GRID_P]
            violations.extend(("p_f", n) for a, b in zip(column, column[1:]) if b < a)
        return PropertyResult(
            "latency_monotonicity",
            not violations,
            f"violations {violations}" if violations else "nonincreasing in N, nondecreasing in p_f",
        )

    def check_agent_agreement(self) -> PropertyResult:
        params = GossipParams(n_total=100, fault_prob=0.25)
        expected = mean_field_trace(params).uninformed
        runs = self.sizes.agent_runs
        totals = np.zeros(len(expected))
        for run in range(runs):
            realized = agent_based_trace(params, SenderPolicy.ALL_CAPABLE, self._rng(3, run)).uninformed
            padded = (realized + [realized[-1]] * len(expected))[:len(expected)]
            totals += np.asarray(padded)

        means = totals / runs
        bad = []
        for t, (mean, r_bar) in enumerate(zip(means, expected)):
            bound = 3 * math.sqrt(r_bar * (1 - r_bar) / (params.n_total * runs))
            if abs(mean - r_bar) > bound:
                bad.append(t)
        return PropertyResult(
            "agent_mean_field_agreement",
            not bad,
            f"{runs} runs, slots outside 3 SE: {bad}",
        )

    def check_latency_orderings(self) -> PropertyResult:
        trials = self.sizes.latency_trials
        runner = ExperimentRunner()

        def run(name: str, **kwargs):
            return runner.run_latency_mc(Scenario(name=name, trials=trials, seed=self.seed, **kwargs))

        small_f = run("f6_zero", base_intensity=25.0, base_faulty=6)
        large_f = run("f18_zero", base_intensity=25.0, base_faulty=18)
        legit_favoring = run("f6_legit", base_intensity=25.0, base_faulty=6,
                             legit_churn=(5.0, 1.0), faulty_churn=(1.0, 1.0))
        faulty_favoring = run("f6_faulty", base_intensity=25.0, base_faulty=6,
                              legit_churn=(1.0, 1.0), faulty_churn=(5.0, 1.0))
        fixed_one = run("n7_f1", base_intensity=7.0, base_faulty=1, fixed_n=7)
        fixed_two = run("n7_f2", base_intensity=7.0, base_faulty=2, fixed_n=7)
        sparse_one = run("l8_f1", base_intensity=8.0, base_faulty=1)
        sparse_two = run("l8_f2", base_intensity=8.0, base_faulty=2)

        checks = [
            large_f.median_latency >= small_f.median_latency,
            faulty_favoring.median_latency >= legit_favoring.median_latency,
            fixed_two.median_latency > fixed_one.median_latency,
            sparse_two.mean_latency > sparse_one.mean_latency,
        ]
        return PropertyResult(
            "latency_orderings",
            all(checks),
            f"medians f6={small_f.median_latency} f18={large_f.median_latency}, "
            f"legit-favoring={legit_favoring.median_latency} faulty-favoring={faulty_favoring.median_latency}, "
            f"fixed N=7 f1={fixed_one.median_latency} f2={fixed_two.median_latency}, "
            f"mean at intensity 8 f1={sparse_one.mean_latency:.4f} f2={sparse_two.mean_latency:.4f}",
        )

    def check_beta_machinery(self) -> PropertyResult:
        n = self.sizes.beta_points
        grid = (np.arange(n) + 0.5) / n
        samples = scipy.stats.beta.ppf(grid, 2.0, 5.0)
        alpha, beta = fit_beta_mom(samples)
        recovery_ok = abs(alpha - 2.0) <= 0.1 and abs(beta - 5.0) <= 0.25

        worst = 0.0
        for x in np.linspace(0.01, 0.99, 99):
            for a in (0.5, 2.0, 7.5):
                worst = max(worst, abs(regularized_incomplete_beta(x, a, 1.0) - x ** a))
                worst = max(worst, abs(regularized_incomplete_beta(x, 1.0, a) - (1 - (1 - x) ** a)))
            worst = max(worst, abs(regularized_incomplete_beta(x, 1.0, 1.0) - x))

        ks = ks_statistic(samples, 2.0, 5.0)
        return PropertyResult(
            "beta_fit_machinery",
            recovery_ok and worst <= 1e-8 and ks <= 0.5 / n + 1e-6,
            f"alpha={alpha:.4f} beta={beta:.4f}, closed-form error {worst:.2e}, KS {ks:.2e}",
        )

    def check_unit_conversion(self) -> PropertyResult:
        values = {profile.value: slots_to_ms(5, profile) for profile in SlotProfile}
        expected = {"CV2X_50": 250.0, "CV2X_100": 500.0, "CV2X_200": 1000.0, "DSRC_100": 500.0}
        return PropertyResult("unit_conversion", values == expected, f"{values}")

    def check_departure_dispersion(self) -> PropertyResult:
        config = ChurnConfig(arrival_rate_hz=0.5, service_rate_hz=1.0, window_s=10.0)
        departures = [
            simulate_mm1_window(config, self._rng(4, run)).departures
            for run in range(self.sizes.queue_runs)
        ]
        _, _, index = dispersion_diagnostic(departures)
        return PropertyResult(
            "departure_dispersion",
            0.9 <= index <= 1.1,
            f"utilization 0.5, {len(departures)} windows, dispersion index {index:.4f}",
        )

    def check_queue_arrival_rate(self) -> PropertyResult:
        config = ChurnConfig(arrival_rate_hz=4.0, service_rate_hz=8.0, window_s=1.0, warmup_s=100.0)
        windows = [simulate_mm1_window(config, self._rng(7, run)) for run in range(self.sizes.queue_runs)]
        arrivals = np.array([window.arrivals for window in windows])
        mean = float(arrivals.mean())
        mean_ok = abs(mean - 4.0) <= 3 * math.sqrt(4.0 / arrivals.size)
        _, _, index = dispersion_diagnostic([window.departures for window in windows])
        return PropertyResult(
            "queue_arrival_rate",
            mean_ok and 0.9 <= index <= 1.1,
            f"4 Hz into 8 Hz, mean arrivals {mean:.4f}, departure dispersion {index:.4f}",
        )

    def check_skellam_moments(self) -> PropertyResult:
        size = self.sizes.churn_samples
        details, passed = [], True
        for stream, (arrival_mean, departure_mean) in enumerate([(4.0, 4.0), (5.0, 0.0), (1.0, 6.0)]):
            _, _, net = sample_churn_deltas(arrival_mean, departure_mean, size, self._rng(8, stream))
            variance = arrival_mean + departure_mean
            mean_ok = abs(net.mean() - (arrival_mean - departure_mean)) <= 3 * math.sqrt(variance / size)
            var_ok = abs(net.var(ddof=1) - variance) <= 0.1 * variance
            sign_ok = departure_mean > 0 or net.min() >= 0
            passed = passed and bool(mean_ok and var_ok and sign_ok)
            details.append(f"({arrival_mean:g},{departure_mean:g}) mean {net.mean():.3f} var {net.var(ddof=1):.3f}")
        return PropertyResult("churn_skellam_moments", passed, ", ".join(details))

    def check_churn_mode_agreement(self) -> PropertyResult:
        runs = self.sizes.queue_runs
        config = ChurnConfig(arrival_rate_hz=0.5, service_rate_hz=1.0, window_s=10.0)
        queue = np.array([simulate_mm1_window(config, self._rng(9, run)).net for run in range(runs)])
        matched = config.arrival_rate_hz * config.window_s
        _, _, counts = sample_churn_deltas(matched, matched, runs, self._rng(10))
        standard_error = math.sqrt(queue.var(ddof=1) / runs + counts.var(ddof=1) / runs)
        gap = abs(queue.mean() - counts.mean())
        return PropertyResult(
            "churn_mode_agreement",
            gap <= 3 * standard_error,
            f"queue net mean {queue.mean():.4f}, count net mean {counts.mean():.4f}, 3 SE {3 * standard_error:.4f}",
        )

    def check_determinism_and_replay(self) -> PropertyResult:
        scenario = Scenario(
            name="replay", base_intensity=25.0, base_faulty=6,
            legit_churn=(1.0, 1.0), faulty_churn=(5.0, 1.0),
            trials=self.sizes.replay_trials, seed=self.seed,
        )
        first = ExperimentRunner().run_latency_mc(scenario)
        second = ExperimentRunner().run_latency_mc(scenario)
        identical = outcome_log_frame(first).to_csv(index=False) == outcome_log_frame(second).to_csv(index=False)
        mismatched = [
            record.trial for record in first.per_trial_log
            if record.latency is not None and replay_latency(record, scenario.epsilon) != record.latency
        ]
        return PropertyResult(
            "determinism_and_replay",
            identical and not mismatched,
            f"identical logs: {identical}, replay mismatches: {len(mismatched)}",
        )


def create_validator(full: bool = False, seed: int = DEFAULT_SEED) -> InvariantValidator:
    """Factory function to create an invariant validator."""
    return InvariantValidator(full=full, seed=seed)
