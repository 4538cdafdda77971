#!/usr/bin/env python3
"""
Main CLI interface for the BFT consensus churn simulator.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Type

import numpy as np
import pandas as pd
from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ValidationError

# Add project root to path
sys.path.append(str(Path(__file__).parent))

import config
from src.churn import churn_deltas_to_frame, sample_churn_delta, simulate_churn_pair
from src.errors import BFTSimError, DegenerateVarianceError, InsufficientDataError, MomentInfeasibleError
from src.experiments import (
    create_experiment_runner,
    dissemination_curves,
    outcome_log_frame,
    slots_to_ms,
    summarize_outcome,
    summary_frame,
)
from src.export import companion_path, write_csv
from src.figures import create_figure_writer
from src.gossip import trace_to_frame
from src.quorum import (
    dispersion_diagnostic,
    estimate_feasibility,
    exact_moments,
    is_bft_feasible,
    quorum_samples_to_frame,
    sample_quorum_law,
)
from src.run_config import (
    ChurnCommandConfig,
    ConvertConfig,
    CurvesConfig,
    DropConfig,
    LatencyConfig,
    QuorumConfig,
    ValidateConfig,
    flag_name,
)
from src.spatial import Region, sample_snapshot, snapshot_counts, snapshot_to_frame
from src.stats import Histogram, fit_latency_samples, fit_report_frame, make_histogram
from src.validation import create_validator

logger = logging.getLogger(__name__)

CONVERT_COLUMNS = ["latency_slots", "profile", "ms"]
DROP_SUMMARY_COLUMNS = [
    "intensity", "fault_prob", "nodes", "faulty", "bft_feasible", "feasible_fraction", "feasibility_trials",
]
QUORUM_SUMMARY_COLUMNS = ["trials", "mean", "variance", "dispersion_index", "exact_mean", "exact_variance"]

# Flags that steer the CLI itself rather than a run
_META_KEYS = {"command", "config", "verbose"}


def resolve_output(out: str, output_dir: Optional[str]) -> Path:
    """Place relative outputs under the resolved output directory."""
    path = Path(out)
    if path.is_absolute():
        return path
    return Path(config.get_output_dir(output_dir)) / path


def run_drop(cfg: DropConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    region = Region(cfg.region_side_m)
    snapshot = sample_snapshot(cfg.intensity, cfg.fault_prob, region, rng)
    total, faulty = snapshot_counts(snapshot)
    feasible = is_bft_feasible(total, faulty)
    fraction = estimate_feasibility(
        cfg.intensity, cfg.fault_prob, cfg.feasibility_trials,
        np.random.default_rng([cfg.seed, 1]), region,
    )
    logger.info(
        f"Dropped {total} nodes, {faulty} faulty; BFT feasible: {feasible} "
        f"({fraction:.1%} of {cfg.feasibility_trials} drops are feasible)"
    )

    out = resolve_output(cfg.out, cfg.output_dir)
    writer = create_figure_writer()
    writer.write(writer.scatter_svg(snapshot, title=f"intensity {cfg.intensity:g}, p_f = {cfg.fault_prob:g}"), out)
    write_csv(snapshot_to_frame(snapshot), companion_path(out))
    summary = pd.DataFrame(
        [(cfg.intensity, cfg.fault_prob, total, faulty, feasible, fraction, cfg.feasibility_trials)],
        columns=DROP_SUMMARY_COLUMNS,
    )
    write_csv(summary, companion_path(out, "_summary"))
    return 0


def run_curves(cfg: CurvesConfig) -> int:
    traces = dissemination_curves(cfg.n, cfg.fault_prob, cfg.epsilon, cfg.max_slots)
    out = resolve_output(cfg.out, cfg.output_dir)

    for n, trace in zip(cfg.n, traces):
        logger.info(f"N={n}: latency {trace.latency_slots} slots")
        write_csv(trace_to_frame(trace), companion_path(out, f"_N{n}"))

    writer = create_figure_writer()
    writer.write(writer.curves_svg(traces, cfg.n, title=f"p_f = {cfg.fault_prob:g}"), out)
    return 0


def run_latency(cfg: LatencyConfig) -> int:
    out = resolve_output(cfg.out, cfg.output_dir)
    scenario = cfg.to_scenario(default_name=out.stem)
    runner = create_experiment_runner(workers=cfg.workers, progress=cfg.progress)
    outcome = runner.run_latency_mc(scenario)

    write_csv(outcome_log_frame(outcome), companion_path(out))
    write_csv(summary_frame([summarize_outcome(scenario.name, outcome)]), companion_path(out, "_summary"))

    fit = None
    try:
        fit = fit_latency_samples(outcome.latencies)
    except (InsufficientDataError, DegenerateVarianceError, MomentInfeasibleError) as e:
        logger.warning(f"Skipping beta fit for {scenario.name}: {e}")
    write_csv(fit_report_frame([(scenario.name, fit, outcome.converged_trials)]), companion_path(out, "_fit"))

    if outcome.latencies:
        histogram = make_histogram(outcome.latencies, cfg.bins)
    else:
        logger.warning(f"No converged trials in {scenario.name}; histogram is empty")
        histogram = Histogram(bin_edges=[0.0, 1.0], counts=[0])

    writer = create_figure_writer()
    writer.write(writer.histogram_svg(histogram, fit, title=scenario.name), out)
    return 0


def run_quorum(cfg: QuorumConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    samples = sample_quorum_law(cfg.faulty_mean, cfg.legit_churn, cfg.faulty_churn, cfg.trials, rng)
    n_min = [sample.n_min for sample in samples]

    mean, variance, _ = dispersion_diagnostic(n_min)
    _, _, index = dispersion_diagnostic([n - 1 for n in n_min])
    exact_mean, exact_variance = exact_moments(cfg.faulty_mean, cfg.legit_churn, cfg.faulty_churn)
    logger.info(
        f"n_min mean {mean:.4f} (exact {exact_mean + 1:.4f}), variance {variance:.4f} "
        f"(exact {exact_variance:.4f}), dispersion index of n_min - 1: {index:.4f}"
    )

    out = resolve_output(cfg.out, cfg.output_dir)
    write_csv(quorum_samples_to_frame(samples), out)
    summary = pd.DataFrame(
        [(cfg.trials, mean, variance, index, exact_mean + 1, exact_variance)],
        columns=QUORUM_SUMMARY_COLUMNS,
    )
    write_csv(summary, companion_path(out, "_summary"))
    return 0


def run_convert(cfg: ConvertConfig) -> int:
    rows = [
        (slots, profile.value, slots_to_ms(slots, profile))
        for slots in cfg.slots
        for profile in cfg.profiles
    ]
    frame = pd.DataFrame(rows, columns=CONVERT_COLUMNS)
    if cfg.out:
        write_csv(frame, resolve_output(cfg.out, cfg.output_dir))
    else:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    return 0


def run_churn(cfg: ChurnCommandConfig) -> int:
    records = []
    queues = cfg.queue_configs() if cfg.mode == "mm1" else None
    for trial in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, trial])
        if queues:
            legit, faulty = simulate_churn_pair(*queues, rng)
        else:
            legit = sample_churn_delta(*cfg.legit_churn, rng)
            faulty = sample_churn_delta(*cfg.faulty_churn, rng)
        records.append((trial, "legit", legit))
        records.append((trial, "faulty", faulty))

    frame = churn_deltas_to_frame(records)
    for population in ("legit", "faulty"):
        departures = frame.loc[frame["population"] == population, "departures"].tolist()
        _, _, index = dispersion_diagnostic(departures)
        logger.info(f"{population} departures: dispersion index {index:.4f}")

    write_csv(frame, resolve_output(cfg.out, cfg.output_dir))
    return 0


def run_validate(cfg: ValidateConfig) -> int:
    report = create_validator(full=cfg.full, seed=cfg.seed).run()
    print(report)
    return 0 if report.passed else 1


COMMANDS: Dict[str, tuple] = {
    "drop": (DropConfig, run_drop),
    "curves": (CurvesConfig, run_curves),
    "latency": (LatencyConfig, run_latency),
    "quorum": (QuorumConfig, run_quorum),
    "convert": (ConvertConfig, run_convert),
    "churn": (ChurnCommandConfig, run_churn),
    "validate": (ValidateConfig, run_validate),
}


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser; option defaults are suppressed so only explicit flags override config files."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="Flat key=value file with parameters (flags override it)")
    common.add_argument("--seed", help="Seed for every stochastic output")
    common.add_argument("--output-dir", dest="output_dir",
                        help=f"Output directory (default: ${config.OUTPUT_DIR_ENV} or '{config.OUTPUT_DIR}')")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    parser = argparse.ArgumentParser(
        description=config.PROJECT_DESCRIPTION,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Node drop scatter plot and its x,y,role table
  python main.py drop --intensity 100 --fault-prob 0.25 --out drop.svg

  # Dissemination curves for several network sizes
  python main.py curves --n 5,45,85,125 --fault-prob 0.5 --out curves.svg

  # Latency distribution under faulty-favoring churn
  python main.py latency --base-intensity 25 --faulty 18 --legit-churn 1,1 --faulty-churn 5,1 --trials 10000 --seed 7 --out latency_f18_faulty.svg

  # Run a shipped preset
  python main.py latency --config presets/latency_f6_zero.conf
        """
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, parents=[common], help=help_text,
                                     argument_default=argparse.SUPPRESS)

    drop = add("drop", "Sample a node drop and plot it")
    drop.add_argument("--intensity", help="Expected number of nodes in the region")
    drop.add_argument("--fault-prob", dest="fault_prob", help="Probability that a node is faulty")
    drop.add_argument("--region-side-m", dest="region_side_m", help="Side of the square region in meters")
    drop.add_argument("--feasibility-trials", dest="feasibility_trials", help="Extra drops for the feasibility estimate")
    drop.add_argument("--out", help="SVG path; the table goes next to it")

    curves = add("curves", "Mean-field dissemination curves")
    curves.add_argument("--n", help="Comma-separated network sizes")
    curves.add_argument("--fault-prob", dest="fault_prob", help="Fault probability")
    curves.add_argument("--epsilon", help="Uninformed-fraction threshold")
    curves.add_argument("--max-slots", dest="max_slots", help="Slot horizon")
    curves.add_argument("--out", help="SVG path; one t,r,r_bar table per curve goes next to it")

    latency = add("latency", "Monte Carlo latency distribution with beta fit")
    latency.add_argument("--name", help="Scenario name (default: output file stem)")
    latency.add_argument("--base-intensity", dest="base_intensity", help="Poisson mean of the baseline node count")
    latency.add_argument("--faulty", help="Baseline faulty count f")
    latency.add_argument("--legit-churn", dest="legit_churn", help="Legitimate arrival,departure means")
    latency.add_argument("--faulty-churn", dest="faulty_churn", help="Faulty arrival,departure means")
    latency.add_argument("--epsilon", help="Uninformed-fraction threshold")
    latency.add_argument("--trials", help="Number of trials")
    latency.add_argument("--fixed-n", dest="fixed_n", help="Use this baseline node count instead of sampling it")
    latency.add_argument("--max-slots", dest="max_slots", help="Slot horizon")
    latency.add_argument("--bins", help="Histogram bins")
    latency.add_argument("--workers", help="Worker processes")
    latency.add_argument("--progress", action="store_true", help="Show a progress bar")
    latency.add_argument("--out", help="SVG path; trial log, summary and fit report go next to it")

    quorum = add("quorum", "Sample the required-node law")
    quorum.add_argument("--faulty-mean", dest="faulty_mean", help="Poisson mean of f")
    quorum.add_argument("--legit-churn", dest="legit_churn", help="Legitimate arrival,departure means")
    quorum.add_argument("--faulty-churn", dest="faulty_churn", help="Faulty arrival,departure means")
    quorum.add_argument("--trials", help="Number of samples")
    quorum.add_argument("--out", help="CSV path; a summary goes next to it")

    convert = add("convert", "Convert slot counts to milliseconds")
    convert.add_argument("--slots", help="Comma-separated slot counts")
    convert.add_argument("--profiles", help="Comma-separated profiles: " + ",".join(config.SLOT_PROFILES_MS))
    convert.add_argument("--out", help="CSV path (default: print to stdout)")

    churn = add("churn", "Sample arrival/departure churn")
    churn.add_argument("--mode", help="counts or mm1")
    churn.add_argument("--legit-churn", dest="legit_churn", help="Legitimate arrival,departure means (counts mode)")
    churn.add_argument("--faulty-churn", dest="faulty_churn", help="Faulty arrival,departure means (counts mode)")
    churn.add_argument("--legit-rates", dest="legit_rates", help="Legitimate arrival,service rates in Hz (mm1 mode)")
    churn.add_argument("--faulty-rates", dest="faulty_rates", help="Faulty arrival,service rates in Hz (mm1 mode)")
    churn.add_argument("--window-s", dest="window_s", help="Observation window in seconds")
    churn.add_argument("--warmup-s", dest="warmup_s", help="Warm-up in seconds")
    churn.add_argument("--trials", help="Number of windows")
    churn.add_argument("--out", help="CSV path")

    validate = add("validate", "Run the invariant suite")
    validate.add_argument(
        "--full", action="store_true",
        help="Use the acceptance sample sizes; the default run uses reduced sizes and is only a smoke check",
    )

    return parser


def load_config_file(path: str) -> Dict[str, str]:
    """Read a key=value file; keys may use dashes or underscores."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"--config: no such file: {path}")
    values = dotenv_values(path)
    return {key.strip().replace("-", "_"): value for key, value in values.items() if value is not None}


def build_run_config(model: Type[BaseModel], args: argparse.Namespace) -> BaseModel:
    explicit = {key: value for key, value in vars(args).items() if key not in _META_KEYS}
    merged = load_config_file(args.config) if getattr(args, "config", None) else {}
    merged.update(explicit)
    return model(**merged)


def dispatch(argv: List[str]) -> int:
    """
    Parse one subcommand, run it and return the exit status.

    Returns:
        0 on success, 1 on runtime failures or failed validation, 2 on usage
        or parameter errors
    """
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if getattr(args, "verbose", False):
        logging.getLogger().setLevel(logging.DEBUG)

    model, handler = COMMANDS[args.command]
    try:
        run_config = build_run_config(model, args)
    except ValidationError as e:
        for error in e.errors():
            if error["loc"]:
                logger.error(f"Invalid value for {flag_name(str(error['loc'][0]))}: {error['msg']}")
            else:
                logger.error(f"Invalid {args.command} parameters: {error['msg']}")
        return 2
    except FileNotFoundError as e:
        logger.error(str(e))
        return 2

    try:
        return handler(run_config)
    except BFTSimError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 1
    except OSError as e:
        logger.error(f"❌ Could not write output (check --out/--output-dir): {e}")
        return 1


def main():
    """Main CLI entry point."""
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
