"""
Test Gossip Dissemination
=========================

Mean-field recurrence, closed-form latency and the agent-based engine.
"""

import math

import numpy as np
import pytest

from src.errors import ParameterDomainError
from src.gossip import (
    GossipParams,
    SenderPolicy,
    agent_based_trace,
    latency_closed_form,
    latency_table,
    mean_field_trace,
    round_half_up,
    trace_to_frame,
)

GRID_N = [1, 5, 45, 85, 125]
GRID_P = [0.1, 0.25, 0.5, 0.75, 0.9]


@pytest.mark.parametrize("kwargs", [
    dict(n_total=0, fault_prob=0.5),
    dict(n_total=5, fault_prob=1.5),
    dict(n_total=5, fault_prob=0.5, epsilon=0.0),
    dict(n_total=5, fault_prob=0.5, epsilon=1.0),
    dict(n_total=5, fault_prob=0.5, max_slots=0),
])
def test_params_validation(kwargs):
    with pytest.raises(ParameterDomainError):
        GossipParams(**kwargs)


def test_mean_field_small_network():
    trace = mean_field_trace(GossipParams(n_total=5, fault_prob=0.25))
    assert trace.uninformed[0] == 0.25
    assert trace.uninformed[1] == pytest.approx(0.25 ** 4.75, rel=1e-12)
    assert trace.uninformed[1] == pytest.approx(1.381e-3, rel=1e-3)
    assert trace.latency_slots == 2
    assert len(trace.informed) == 3


def test_no_faults_converge_at_slot_zero():
    trace = mean_field_trace(GossipParams(n_total=12, fault_prob=0.0))
    assert trace.informed == [1.0]
    assert trace.latency_slots == 0


def test_all_faulty_never_converges():
    params = GossipParams(n_total=10, fault_prob=1.0, max_slots=25)
    trace = mean_field_trace(params)
    assert not trace.converged
    assert len(trace.uninformed) == 26
    assert latency_closed_form(params) is None


@pytest.mark.parametrize("n,p", [(n, p) for n in GRID_N for p in GRID_P])
def test_trace_sanity(n, p):
    params = GossipParams(n_total=n, fault_prob=p)
    trace = mean_field_trace(params)
    assert trace.informed[0] == pytest.approx(1.0 - p)
    decay = p ** (n * (1.0 - p))
    for before, after in zip(trace.uninformed, trace.uninformed[1:]):
        assert after == before * decay
    informed = trace.informed
    assert all(0.0 <= r <= 1.0 for r in informed)
    assert all(b >= a for a, b in zip(informed, informed[1:]))


@pytest.mark.parametrize("n,p,expected", [
    (5, 0.5, 7),
    (5, 0.25, 2),
    (7, 1e-6, 0),
])
def test_closed_form_examples(n, p, expected):
    assert latency_closed_form(GossipParams(n_total=n, fault_prob=p, epsilon=1e-5)) == expected


@pytest.mark.parametrize("n,p", [(n, p) for n in GRID_N for p in GRID_P])
def test_closed_form_matches_iteration(n, p):
    params = GossipParams(n_total=n, fault_prob=p, epsilon=1e-5)
    assert latency_closed_form(params) == mean_field_trace(params).latency_slots


def test_closed_form_respects_horizon():
    params = GossipParams(n_total=1, fault_prob=0.9, max_slots=3)
    assert latency_closed_form(params) is None
    assert mean_field_trace(params).latency_slots is None


def test_latency_monotonic_in_size_and_fault_prob():
    """Latency never grows with N and never shrinks with p_f"""
    table = latency_table(GRID_N, GRID_P)
    assert set(table) == {(n, p) for n in GRID_N for p in GRID_P}
    for p in GRID_P:
        row = [table[(n, p)] for n in GRID_N]
        assert all(b <= a for a, b in zip(row, row[1:])), f"p_f={p}: {row}"
    for n in GRID_N:
        column = [table[(n, p)] for p in GRID_P]
        assert all(b >= a for a, b in zip(column, column[1:])), f"N={n}: {column}"


def test_round_half_up():
    assert round_half_up(0.5) == 1
    assert round_half_up(1.5) == 2
    assert round_half_up(2.5) == 3
    assert round_half_up(74.49) == 74


@pytest.mark.parametrize("policy", list(SenderPolicy))
def test_agent_without_faults_is_informed_immediately(policy):
    trace = agent_based_trace(GossipParams(n_total=30, fault_prob=0.0), policy, np.random.default_rng(0))
    assert trace.latency_slots == 0
    assert trace.informed == [1.0]


def test_agent_matches_mean_field():
    """AllCapable runs at N=100, p_f=0.25 track the recurrence within 3 binomial SE"""
    params = GossipParams(n_total=100, fault_prob=0.25)
    expected = mean_field_trace(params).uninformed
    runs = 10_000
    totals = np.zeros(len(expected))
    for run in range(runs):
        realized = agent_based_trace(params, SenderPolicy.ALL_CAPABLE, np.random.default_rng([5, run])).uninformed
        # converged traces hold their final fraction
        padded = (realized + [realized[-1]] * len(expected))[:len(expected)]
        totals += np.asarray(padded)

    for t, (mean, r_bar) in enumerate(zip(totals / runs, expected)):
        bound = 3 * math.sqrt(r_bar * (1 - r_bar) / (params.n_total * runs))
        assert abs(mean - r_bar) <= bound, f"slot {t}: {mean} vs {r_bar}"


def test_agent_single_node_uses_one_sender():
    """N=1, p_f=0.5 rounds the sender count up to one, so the node is reached within a few slots"""
    params = GossipParams(n_total=1, fault_prob=0.5)
    assert round_half_up(params.sender_exponent) == 1
    latencies = [
        agent_based_trace(params, SenderPolicy.ALL_CAPABLE, np.random.default_rng([6, seed])).latency_slots
        for seed in range(1001)
    ]
    assert all(latency is not None for latency in latencies)
    assert float(np.median(latencies)) <= 1.0


def test_informed_only_policy_converges_when_seeded():
    params = GossipParams(n_total=100, fault_prob=0.25)
    trace = agent_based_trace(params, SenderPolicy.INFORMED_ONLY, np.random.default_rng(9))
    assert trace.converged
    assert trace.latency_slots <= 3
    assert all(b >= a for a, b in zip(trace.informed, trace.informed[1:]))


def test_agent_trace_is_deterministic():
    params = GossipParams(n_total=40, fault_prob=0.6)
    first = agent_based_trace(params, SenderPolicy.INFORMED_ONLY, np.random.default_rng(3))
    second = agent_based_trace(params, SenderPolicy.INFORMED_ONLY, np.random.default_rng(3))
    assert first == second


def test_trace_frame_header():
    frame = trace_to_frame(mean_field_trace(GossipParams(n_total=5, fault_prob=0.5)))
    assert list(frame.columns) == ["t", "r", "r_bar"]
    assert frame["t"].tolist() == list(range(8))
    assert np.allclose(frame["r"] + frame["r_bar"], 1.0)
