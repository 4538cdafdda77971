"""
Test Spatial Node Drops
=======================

PPP counts, thinning and snapshot tables.
"""

import math

import numpy as np
import pytest

from src.errors import ParameterDomainError
from src.quorum import dispersion_diagnostic
from src.spatial import (
    NetworkSnapshot,
    Node,
    Region,
    Role,
    role_counts_by_population,
    sample_snapshot,
    snapshot_counts,
    snapshot_to_frame,
)

UNIT = Region(1.0)


def test_region_rejects_non_positive_side():
    with pytest.raises(ParameterDomainError):
        Region(0.0)
    with pytest.raises(ValueError):
        Region(-2.0)


@pytest.mark.parametrize("intensity,fault_prob", [(-1.0, 0.5), (10.0, -0.1), (10.0, 1.5)])
def test_sample_snapshot_rejects_bad_parameters(intensity, fault_prob):
    with pytest.raises(ParameterDomainError):
        sample_snapshot(intensity, fault_prob, UNIT, np.random.default_rng(0))


def test_zero_intensity_gives_empty_snapshot():
    snapshot = sample_snapshot(0.0, 0.5, Region(250.0), np.random.default_rng(1))
    assert len(snapshot) == 0
    assert snapshot_counts(snapshot) == (0, 0)


def test_fault_prob_one_marks_every_node():
    snapshot = sample_snapshot(50.0, 1.0, UNIT, np.random.default_rng(2))
    assert len(snapshot) > 0
    assert all(node.is_faulty for node in snapshot.nodes)


def test_coordinates_stay_in_region():
    region = Region(300.0)
    snapshot = sample_snapshot(200.0, 0.3, region, np.random.default_rng(3))
    for node in snapshot.nodes:
        assert 0.0 <= node.x_m <= region.side_m
        assert 0.0 <= node.y_m <= region.side_m


def test_same_seed_same_snapshot():
    first = sample_snapshot(100.0, 0.25, UNIT, np.random.default_rng(42))
    second = sample_snapshot(100.0, 0.25, UNIT, np.random.default_rng(42))
    assert first == second


def test_snapshot_counts_direct():
    nodes = tuple(
        [Node(0.1, 0.1, Role.LEGITIMATE)] * 3 + [Node(0.2, 0.2, Role.FAULTY)] * 2
    )
    snapshot = NetworkSnapshot(region=UNIT, nodes=nodes)
    assert snapshot_counts(snapshot) == (5, 2)
    assert role_counts_by_population(snapshot) == (3, 2)


def test_thinning_and_count_law():
    """Pooled faulty fraction, count dispersion and x-uniformity over 10,000 drops"""
    rng = np.random.default_rng(2024)
    totals, faulty_totals, legit_totals, xs = [], [], [], []
    for _ in range(10_000):
        snapshot = sample_snapshot(100.0, 0.25, UNIT, rng)
        legit, faulty = role_counts_by_population(snapshot)
        totals.append(legit + faulty)
        legit_totals.append(legit)
        faulty_totals.append(faulty)
        xs.extend(node.x_m for node in snapshot.nodes)

    pooled = sum(totals)
    fraction = sum(faulty_totals) / pooled
    assert abs(fraction - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / pooled)

    mean, _, index = dispersion_diagnostic(totals)
    assert abs(mean - 100.0) <= 3 * math.sqrt(100.0 / len(totals))
    assert 0.95 <= index <= 1.05

    # thinned populations are Poisson with means 75 and 25
    assert abs(np.mean(faulty_totals) - 25.0) <= 3 * math.sqrt(25.0 / len(totals))
    assert abs(np.mean(legit_totals) - 75.0) <= 3 * math.sqrt(75.0 / len(totals))

    assert abs(np.mean(xs) - 0.5) <= 3 / math.sqrt(12 * len(xs))


def test_snapshot_frame_has_exact_header_and_roles():
    snapshot = sample_snapshot(30.0, 0.5, UNIT, np.random.default_rng(5))
    frame = snapshot_to_frame(snapshot)
    assert list(frame.columns) == ["x", "y", "role"]
    assert set(frame["role"]) <= {"legit", "faulty"}
