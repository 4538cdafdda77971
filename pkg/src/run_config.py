"""
Validated parameter sets for each CLI subcommand.

Values arrive as strings from config files or as parsed flags; field names
match the flag spelling with underscores, so a validation error maps back to
the offending flag.
"""

from typing import Annotated, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from config import (
    DEFAULT_EPSILON,
    DEFAULT_HISTOGRAM_BINS,
    DEFAULT_MAX_SLOTS,
    DEFAULT_REGION_SIDE_M,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
)
from src.churn import ChurnConfig
from src.experiments import Scenario, SlotProfile


def _split(value):
    """Accept ``"5,45,85"`` as well as a list."""
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


def _pair(value):
    parts = _split(value)
    if isinstance(parts, list) and len(parts) != 2:
        raise ValueError(f"expected two comma-separated values, got {value!r}")
    return parts


ChurnPair = Annotated[Tuple[float, float], BeforeValidator(_pair)]
IntList = Annotated[List[int], BeforeValidator(_split)]
ProfileList = Annotated[List[SlotProfile], BeforeValidator(_split)]


def flag_name(field: str) -> str:
    return "--" + field.replace("_", "-")


class RunConfig(BaseModel):
    """Fields shared by every subcommand."""
    model_config = ConfigDict(extra="forbid")

    seed: int = DEFAULT_SEED
    output_dir: Optional[str] = None


class DropConfig(RunConfig):
    intensity: float = Field(100.0, ge=0)
    fault_prob: float = Field(0.25, ge=0, le=1)
    region_side_m: float = Field(DEFAULT_REGION_SIDE_M, gt=0)
    feasibility_trials: int = Field(1000, ge=1)
    out: str = "drop.svg"


class CurvesConfig(RunConfig):
    n: IntList = Field(default_factory=lambda: [5, 45, 85, 125])
    fault_prob: float = Field(0.5, ge=0, le=1)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0, lt=1)
    max_slots: int = Field(DEFAULT_MAX_SLOTS, ge=1)
    out: str = "curves.svg"

    @field_validator("n")
    @classmethod
    def _positive_sizes(cls, value: List[int]) -> List[int]:
        if any(n < 1 for n in value):
            raise ValueError("network sizes must be positive")
        return value


class LatencyConfig(RunConfig):
    name: Optional[str] = None
    base_intensity: float = Field(25.0, ge=0)
    faulty: int = Field(6, ge=0)
    legit_churn: ChurnPair = (0.0, 0.0)
    faulty_churn: ChurnPair = (0.0, 0.0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0, lt=1)
    trials: int = Field(DEFAULT_TRIALS, ge=1)
    fixed_n: Optional[int] = Field(None, ge=1)
    max_slots: int = Field(DEFAULT_MAX_SLOTS, ge=1)
    bins: int = Field(DEFAULT_HISTOGRAM_BINS, ge=1)
    workers: int = Field(1, ge=1)
    progress: bool = False
    out: str = "latency.svg"

    @field_validator("legit_churn", "faulty_churn")
    @classmethod
    def _non_negative_means(cls, value: ChurnPair) -> ChurnPair:
        if min(value) < 0:
            raise ValueError("churn means must be non-negative")
        return value

    def to_scenario(self, default_name: str) -> Scenario:
        return Scenario(
            name=self.name or default_name,
            base_intensity=self.base_intensity,
            base_faulty=self.faulty,
            legit_churn=self.legit_churn,
            faulty_churn=self.faulty_churn,
            epsilon=self.epsilon,
            trials=self.trials,
            seed=self.seed,
            fixed_n=self.fixed_n,
            max_slots=self.max_slots,
        )


class QuorumConfig(RunConfig):
    faulty_mean: float = Field(25.0, ge=0)
    legit_churn: ChurnPair = (0.0, 0.0)
    faulty_churn: ChurnPair = (0.0, 0.0)
    trials: int = Field(100_000, ge=2)
    out: str = "quorum.csv"

    @field_validator("legit_churn", "faulty_churn")
    @classmethod
    def _non_negative_means(cls, value: ChurnPair) -> ChurnPair:
        if min(value) < 0:
            raise ValueError("churn means must be non-negative")
        return value


class ConvertConfig(RunConfig):
    slots: IntList = Field(default_factory=lambda: [5])
    profiles: ProfileList = Field(default_factory=lambda: list(SlotProfile))
    out: Optional[str] = None

    @field_validator("slots")
    @classmethod
    def _non_negative_slots(cls, value: List[int]) -> List[int]:
        if any(s < 0 for s in value):
            raise ValueError("slot counts must be non-negative")
        return value


class ChurnCommandConfig(RunConfig):
    """
    ``counts`` mode draws Poisson counts from ``*_churn`` means; ``mm1`` mode
    runs queues with ``*_rates`` given as (arrival_hz, service_hz).
    """
    mode: Literal["counts", "mm1"] = "counts"
    legit_churn: ChurnPair = (2.0, 2.0)
    faulty_churn: ChurnPair = (1.0, 1.0)
    legit_rates: ChurnPair = (0.5, 1.0)
    faulty_rates: ChurnPair = (0.25, 1.0)
    window_s: float = Field(10.0, gt=0)
    warmup_s: Optional[float] = Field(None, ge=0)
    trials: int = Field(1000, ge=2)
    out: str = "churn.csv"

    @model_validator(mode="after")
    def _stable_queues(self):
        if self.mode == "mm1":
            for rates in (self.legit_rates, self.faulty_rates):
                queue = ChurnConfig(rates[0], rates[1], self.window_s, self.warmup_s)
                if not queue.is_stable:
                    raise ValueError(f"queue utilization {queue.utilization:.3f} must be below 1")
        elif min(self.legit_churn + self.faulty_churn) < 0:
            raise ValueError("churn means must be non-negative")
        return self

    def queue_configs(self) -> Tuple[ChurnConfig, ChurnConfig]:
        return (
            ChurnConfig(*self.legit_rates, window_s=self.window_s, warmup_s=self.warmup_s),
            ChurnConfig(*self.faulty_rates, window_s=self.window_s, warmup_s=self.warmup_s),
        )


class ValidateConfig(RunConfig):
    full: bool = False
