"""
Test Quorum Arithmetic
======================

Required-node rule, its sampled law and the dispersion diagnostic.
"""

import math

import numpy as np
import pytest

from src.errors import InsufficientDataError, ParameterDomainError
from src.quorum import (
    QuorumInput,
    dispersion_diagnostic,
    estimate_feasibility,
    exact_moments,
    is_bft_feasible,
    quorum_samples_to_frame,
    required_node_intensity,
    required_nodes,
    sample_quorum_law,
    sample_required_nodes,
)


@pytest.mark.parametrize("faulty", range(101))
def test_zero_churn_reduces_to_classic_threshold(faulty):
    assert required_nodes(QuorumInput(faulty)).n_min == 3 * faulty + 1


@pytest.mark.parametrize("faulty,delta_legit,delta_faulty,expected", [
    (1, 0, 0, 4),
    (0, 0, 0, 1),
    (6, 0, 0, 19),
    (6, 3, 5, 21),
    (6, 4, 0, 15),
    (6, 0, 3, 22),
    (18, 2, 1, 54),
    (0, 5, 0, 1),  # clamps at one
])
def test_required_nodes_examples(faulty, delta_legit, delta_faulty, expected):
    assert required_nodes(QuorumInput(faulty, delta_legit, delta_faulty)).n_min == expected


def test_required_nodes_is_monotone():
    """Nondecreasing in f and delta_f, nonincreasing in delta_N"""
    def n_min(faulty, delta_legit, delta_faulty):
        return required_nodes(QuorumInput(faulty, delta_legit, delta_faulty)).n_min

    for faulty in range(0, 12):
        for delta_legit in range(-8, 9):
            for delta_faulty in range(-8, 9):
                current = n_min(faulty, delta_legit, delta_faulty)
                assert n_min(faulty + 1, delta_legit, delta_faulty) >= current
                assert n_min(faulty, delta_legit, delta_faulty + 1) >= current
                assert n_min(faulty, delta_legit + 1, delta_faulty) <= current


def test_negative_faulty_is_rejected():
    with pytest.raises(ParameterDomainError):
        QuorumInput(-1)


def test_bft_feasibility():
    assert is_bft_feasible(4, 1)
    assert not is_bft_feasible(3, 1)
    assert is_bft_feasible(1, 0)
    assert not is_bft_feasible(0, 0)
    with pytest.raises(ParameterDomainError):
        is_bft_feasible(2, 3)
    with pytest.raises(ParameterDomainError):
        is_bft_feasible(-1, 0)


def test_required_node_intensity_and_exact_moments():
    assert required_node_intensity(25.0, 2.0, 1.0) == pytest.approx(74.0)
    mean, variance = exact_moments(25.0, (4.0, 2.0), (2.0, 1.0))
    assert mean == pytest.approx(74.0)
    assert variance == pytest.approx(9 * 25.0 + 4.0 + 2.0 + 2.0 + 1.0)


def test_required_node_law_mean_and_overdispersion():
    """100,000 draws at faulty mean 25, legit net 2, faulty net 1"""
    trials = 100_000
    n_min = sample_required_nodes(25.0, (4.0, 2.0), (2.0, 1.0), trials, np.random.default_rng(1))
    assert len(n_min) == trials

    mean, variance, _ = dispersion_diagnostic(n_min)
    assert abs(mean - 75.0) <= 3 * math.sqrt(variance / trials)

    _, _, index = dispersion_diagnostic([n - 1 for n in n_min])
    assert index > 1.05


def test_zero_churn_law_is_three_times_poisson():
    samples = sample_quorum_law(10.0, (0.0, 0.0), (0.0, 0.0), 2_000, np.random.default_rng(2))
    for sample in samples:
        assert sample.delta_legit == sample.delta_faulty == 0
        assert sample.n_min == 3 * sample.faulty + 1


def test_no_faults_and_no_churn_always_need_one_node():
    n_min = sample_required_nodes(0.0, (0.0, 0.0), (0.0, 0.0), 1_000, np.random.default_rng(9))
    assert n_min == [1] * 1_000


def test_sample_quorum_law_rejects_bad_input():
    with pytest.raises(ParameterDomainError):
        sample_quorum_law(5.0, (0.0, 0.0), (0.0, 0.0), 0, np.random.default_rng(0))
    with pytest.raises(ParameterDomainError):
        sample_quorum_law(-5.0, (0.0, 0.0), (0.0, 0.0), 10, np.random.default_rng(0))


def test_dispersion_diagnostic_examples():
    assert dispersion_diagnostic([2, 2, 2, 2]) == (2.0, 0.0, 0.0)
    mean, variance, index = dispersion_diagnostic([1, 3])
    assert (mean, variance, index) == (2.0, 2.0, 1.0)
    assert dispersion_diagnostic([0, 0, 0]) == (0.0, 0.0, 0.0)
    assert dispersion_diagnostic([-1, 1])[2] == math.inf
    with pytest.raises(InsufficientDataError):
        dispersion_diagnostic([5])


def test_feasibility_estimate_bounds():
    rng = np.random.default_rng(3)
    assert estimate_feasibility(0.0, 0.25, 50, rng) == 0.0
    assert estimate_feasibility(100.0, 0.0, 50, rng) == 1.0
    # roughly 3% of drops violate 3f+1 at p_f = 0.25
    fraction = estimate_feasibility(100.0, 0.25, 500, rng)
    assert 0.0 < fraction < 1.0


def test_quorum_frame_header():
    samples = sample_quorum_law(3.0, (1.0, 1.0), (1.0, 1.0), 5, np.random.default_rng(4))
    frame = quorum_samples_to_frame(samples)
    assert list(frame.columns) == ["trial", "f", "delta_N", "delta_f", "n_min"]
    assert frame["trial"].tolist() == [0, 1, 2, 3, 4]


def test_poisson_samples_have_unit_dispersion():
    samples = np.random.default_rng(5).poisson(10.0, 100_000)
    _, _, index = dispersion_diagnostic(samples)
    assert 0.95 <= index <= 1.05


def test_symmetric_churn_still_overdisperses():
    n_min = sample_required_nodes(25.0, (4.0, 4.0), (4.0, 4.0), 100_000, np.random.default_rng(6))
    _, _, index = dispersion_diagnostic([n - 1 for n in n_min])
    assert index > 1.05
