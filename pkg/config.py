# Configuration file for the BFT consensus churn simulator

import os
from typing import Dict, Optional

# Project Information
PROJECT_NAME = "BFT Consensus Under Churn Simulator"
PROJECT_DESCRIPTION = "Stochastic simulation of Byzantine-fault-tolerant consensus feasibility and latency among mobile nodes"
PROJECT_VERSION = "1.0.0"

# Paths and Directories
OUTPUT_DIR = "output"
OUTPUT_DIR_ENV = "BFTSIM_OUTPUT_DIR"
PRESETS_DIR = "presets"

# Randomness
DEFAULT_SEED = 0

# Spatial model
DEFAULT_REGION_SIDE_M = 1.0

# Gossip Configuration
DEFAULT_EPSILON = 1e-5
DEFAULT_MAX_SLOTS = 10_000

# Churn Configuration
WARMUP_SERVICE_MULTIPLE = 100  # warm-up = multiple / service_rate_hz seconds

# Experiment Configuration
REJECTION_ACCEPTANCE_FLOOR = 0.01  # below this, sample the truncated Poisson tail directly
DEFAULT_TRIALS = 10_000
DEFAULT_HISTOGRAM_BINS = 20

# Slot durations (milliseconds) per radio profile
SLOT_PROFILES_MS = {
    "CV2X_50": 50.0,
    "CV2X_100": 100.0,
    "CV2X_200": 200.0,
    "DSRC_100": 100.0,
}

# Figure Configuration
FIGURE_SIZE_IN = (6.4, 4.8)
FIGURE_DPI = 100
SVG_HASH_SALT = "bftsim"  # fixed element ids keep SVG output reproducible
CURVE_COLORS = ["#2ca02c", "#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"]


def get_output_dir(override: Optional[str] = None) -> str:
    """Resolve the output directory: explicit override, then environment, then default."""
    if override:
        return override
    return os.getenv(OUTPUT_DIR_ENV) or OUTPUT_DIR


def get_project_metadata() -> Dict[str, str]:
    """Get complete project metadata"""
    return {
        "name": PROJECT_NAME,
        "description": PROJECT_DESCRIPTION,
        "version": PROJECT_VERSION,
    }
