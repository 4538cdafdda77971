"""
Arrival/departure churn for the legitimate and faulty node populations.

Two modes are available. ``simulate_mm1_window`` runs a FIFO single-server
queue event by event and counts arrivals and service completions inside an
observation window after warm-up; at stationarity the departures form a
Poisson stream at the arrival rate. ``sample_churn_delta`` skips the queue
and draws both counts as independent Poisson variables, which lets arrival
and departure means differ.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from config import WARMUP_SERVICE_MULTIPLE
from src.errors import ParameterDomainError, UnstableQueueError

logger = logging.getLogger(__name__)

CHURN_COLUMNS = ["trial", "population", "arrivals", "departures", "net"]


@dataclass(frozen=True)
class ChurnConfig:
    """
    M/M/1 churn parameters for one population.

    ``warmup_s`` defaults to WARMUP_SERVICE_MULTIPLE / service_rate_hz.
    """
    arrival_rate_hz: float
    service_rate_hz: float
    window_s: float
    warmup_s: Optional[float] = field(default=None)

    def __post_init__(self):
        if self.arrival_rate_hz < 0:
            raise ParameterDomainError(f"arrival_rate_hz must be non-negative, got {self.arrival_rate_hz}")
        if not self.service_rate_hz > 0:
            raise ParameterDomainError(f"service_rate_hz must be positive, got {self.service_rate_hz}")
        if not self.window_s > 0:
            raise ParameterDomainError(f"window_s must be positive, got {self.window_s}")
        if self.warmup_s is None:
            object.__setattr__(self, "warmup_s", WARMUP_SERVICE_MULTIPLE / self.service_rate_hz)
        elif self.warmup_s < 0:
            raise ParameterDomainError(f"warmup_s must be non-negative, got {self.warmup_s}")

    @property
    def utilization(self) -> float:
        return self.arrival_rate_hz / self.service_rate_hz

    @property
    def is_stable(self) -> bool:
        return self.utilization < 1.0


@dataclass(frozen=True)
class ChurnDelta:
    """Arrival and departure counts over one window."""
    arrivals: int
    departures: int

    def __post_init__(self):
        if self.arrivals < 0 or self.departures < 0:
            raise ParameterDomainError("churn counts must be non-negative")

    @property
    def net(self) -> int:
        return self.arrivals - self.departures


def simulate_mm1_window(config: ChurnConfig, rng: np.random.Generator) -> ChurnDelta:
    """
    Run a single-server FIFO queue and count events in the observation window.

    The queue starts empty at time zero. Events before ``warmup_s`` are
    discarded; arrivals and service completions in
    ``[warmup_s, warmup_s + window_s)`` are counted.

    Args:
        config: Queue rates and window
        rng: Caller-owned random generator

    Returns:
        ChurnDelta with the windowed arrival and departure counts

    Raises:
        UnstableQueueError: If utilization is at least one
    """
    if not config.is_stable:
        raise UnstableQueueError(
            f"utilization {config.utilization:.3f} >= 1 "
            f"(arrival {config.arrival_rate_hz} Hz, service {config.service_rate_hz} Hz)"
        )
    if config.arrival_rate_hz == 0:
        return ChurnDelta(0, 0)

    start = config.warmup_s
    end = start + config.window_s
    mean_interarrival = 1.0 / config.arrival_rate_hz
    mean_service = 1.0 / config.service_rate_hz

    system = deque()  # arrival timestamps, head is in service
    next_arrival = rng.exponential(mean_interarrival)
    next_departure = math.inf
    arrivals = departures = 0

    while min(next_arrival, next_departure) < end:
        if next_arrival <= next_departure:
            now = next_arrival
            system.append(now)
            if len(system) == 1:
                next_departure = now + rng.exponential(mean_service)
            if now >= start:
                arrivals += 1
            next_arrival = now + rng.exponential(mean_interarrival)
        else:
            now = next_departure
            system.popleft()
            if now >= start:
                departures += 1
            next_departure = now + rng.exponential(mean_service) if system else math.inf

    return ChurnDelta(arrivals, departures)


def simulate_churn_pair(
    legit_config: ChurnConfig,
    faulty_config: ChurnConfig,
    rng: np.random.Generator
) -> Tuple[ChurnDelta, ChurnDelta]:
    """Run independent legitimate and faulty queues; returns (legit, faulty)."""
    return simulate_mm1_window(legit_config, rng), simulate_mm1_window(faulty_config, rng)


def _check_means(arrival_mean: float, departure_mean: float):
    if arrival_mean < 0 or departure_mean < 0:
        raise ParameterDomainError(
            f"churn means must be non-negative, got ({arrival_mean}, {departure_mean})"
        )


def sample_churn_delta(
    arrival_mean: float,
    departure_mean: float,
    rng: np.random.Generator
) -> ChurnDelta:
    """
    Draw arrivals and departures as independent Poisson counts.

    The net change is Skellam distributed with mean
    ``arrival_mean - departure_mean`` and variance ``arrival_mean + departure_mean``.
    """
    _check_means(arrival_mean, departure_mean)
    return ChurnDelta(int(rng.poisson(arrival_mean)), int(rng.poisson(departure_mean)))


def sample_churn_deltas(
    arrival_mean: float,
    departure_mean: float,
    size: int,
    rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``sample_churn_delta``; returns (arrivals, departures, net) arrays."""
    _check_means(arrival_mean, departure_mean)
    if size < 0:
        raise ParameterDomainError(f"size must be non-negative, got {size}")
    arrivals = rng.poisson(arrival_mean, size)
    departures = rng.poisson(departure_mean, size)
    return arrivals, departures, arrivals - departures


def churn_deltas_to_frame(records: Iterable[Tuple[int, str, ChurnDelta]]) -> pd.DataFrame:
    """Tabulate (trial, population, delta) records as ``trial,population,arrivals,departures,net``."""
    rows = [
        (trial, population, delta.arrivals, delta.departures, delta.net)
        for trial, population, delta in records
    ]
    return pd.DataFrame(rows, columns=CHURN_COLUMNS)
