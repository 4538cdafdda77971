"""
Poisson point process node drops in a square region.

A drop samples the node count from a Poisson law whose mean is the expected
number of nodes in the whole region, scatters the nodes uniformly, and thins
them independently into legitimate and faulty roles.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
import pandas as pd

from src.errors import ParameterDomainError

logger = logging.getLogger(__name__)

SNAPSHOT_COLUMNS = ["x", "y", "role"]


class Role(Enum):
    """Node role after thinning."""
    LEGITIMATE = "legit"
    FAULTY = "faulty"


@dataclass(frozen=True)
class Region:
    """Square deployment area of side ``side_m`` meters."""
    side_m: float

    def __post_init__(self):
        if not self.side_m > 0:
            raise ParameterDomainError(f"region side must be positive, got {self.side_m}")


@dataclass(frozen=True)
class Node:
    x_m: float
    y_m: float
    role: Role

    @property
    def is_faulty(self) -> bool:
        return self.role is Role.FAULTY


@dataclass(frozen=True)
class NetworkSnapshot:
    """A realized drop: nodes in generation order."""
    region: Region
    nodes: Tuple[Node, ...]

    def __len__(self) -> int:
        return len(self.nodes)


def _check_drop_parameters(intensity: float, fault_prob: float):
    if intensity < 0:
        raise ParameterDomainError(f"intensity must be non-negative, got {intensity}")
    if not 0.0 <= fault_prob <= 1.0:
        raise ParameterDomainError(f"fault_prob must lie in [0, 1], got {fault_prob}")


def sample_snapshot(
    intensity: float,
    fault_prob: float,
    region: Region,
    rng: np.random.Generator
) -> NetworkSnapshot:
    """
    Drop nodes following a homogeneous PPP and thin them into roles.

    Args:
        intensity: Expected number of nodes in the whole region
        fault_prob: Independent probability that a node is faulty
        region: Square region to drop into
        rng: Caller-owned random generator

    Returns:
        NetworkSnapshot with nodes in generation order
    """
    _check_drop_parameters(intensity, fault_prob)

    count = int(rng.poisson(intensity))
    xs = rng.uniform(0.0, region.side_m, count)
    ys = rng.uniform(0.0, region.side_m, count)
    # random() is in [0, 1), so fault_prob=1 marks every node and 0 marks none
    faulty = rng.random(count) < fault_prob

    nodes = tuple(
        Node(float(x), float(y), Role.FAULTY if bad else Role.LEGITIMATE)
        for x, y, bad in zip(xs, ys, faulty)
    )
    logger.debug(f"Dropped {count} nodes ({int(faulty.sum())} faulty) in {region.side_m} m square")
    return NetworkSnapshot(region=region, nodes=nodes)


def snapshot_counts(snapshot: NetworkSnapshot) -> Tuple[int, int]:
    """Return (total, faulty) node counts."""
    faulty = sum(1 for node in snapshot.nodes if node.is_faulty)
    return len(snapshot.nodes), faulty


def role_counts_by_population(snapshot: NetworkSnapshot) -> Tuple[int, int]:
    """Return (legitimate, faulty) node counts."""
    total, faulty = snapshot_counts(snapshot)
    return total - faulty, faulty


def snapshot_to_frame(snapshot: NetworkSnapshot) -> pd.DataFrame:
    """Tabulate a snapshot with columns ``x,y,role``."""
    rows = [(node.x_m, node.y_m, node.role.value) for node in snapshot.nodes]
    return pd.DataFrame(rows, columns=SNAPSHOT_COLUMNS)
