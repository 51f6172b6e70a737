import numpy as np
import pytest

from teamdp.model import (
    CostTable,
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    DecisionMaker,
    TeamSpec,
    expected_cost,
)
from teamdp.oracle import sample_randomized_policy
from teamdp.strategic import (
    StrategicMeasure,
    induce_measure,
    measure_expected_cost,
    validate_la,
    validate_lr,
)

from conftest import random_deterministic_policy, random_team


def test_induced_deterministic_passes_la(rng):
    for _ in range(10):
        spec = random_team(rng, n_dms=2)
        policy = random_deterministic_policy(rng, spec)
        measure = induce_measure(spec, policy)
        report = validate_la(measure, spec, tol=1e-12)
        assert report.passed, report
        assert report.kernel_gap <= 1e-12
        assert report.ci_gap <= 1e-12
        assert report.determinism_gap <= 1e-12


def test_induced_randomized_passes_lr_fails_la(rng):
    spec = random_team(rng, n_dms=2, min_size=2)
    policy = sample_randomized_policy(rng=rng, spec=spec)
    measure = induce_measure(spec, policy)
    assert validate_lr(measure, spec, tol=1e-12).passed
    la = validate_la(measure, spec, tol=1e-9)
    assert not la.passed
    assert la.determinism_gap > 1e-3
    assert any(w[0] == "determinism" for w in la.witnesses)


def test_measure_expected_cost_matches(rng):
    spec = random_team(rng, n_dms=3)
    policy = random_deterministic_policy(rng, spec)
    measure = induce_measure(spec, policy)
    assert measure_expected_cost(measure, spec.cost) == pytest.approx(
        expected_cost(spec, policy), abs=1e-12
    )


def copy_corruption_team():
    """DM2's y2 is exogenous uniform; the corrupted measure sets u2 = y1."""
    omega = FiniteSpace(("*",))
    prior = Distribution(omega, np.array([1.0]))
    y1 = FiniteSpace((0, 1))
    u1 = FiniteSpace((0,))
    k1 = Kernel((omega,), y1, np.array([[0.5, 0.5]]))
    y2 = FiniteSpace((0, 1))
    u2 = FiniteSpace((0, 1))
    k2 = Kernel((omega, y1, u1), y2, np.full((1, 2, 1, 2), 0.5))
    cost = np.zeros((1, 1, 2))
    return TeamSpec(
        omega, prior, (DecisionMaker(y1, u1, k1), DecisionMaker(y2, u2, k2)), CostTable(cost)
    )


def test_copy_corruption_breaks_conditional_independence():
    """u2 copying y1 leaks history through the action: ciGap is exactly 0.5."""
    spec = copy_corruption_team()
    probs = np.zeros((1, 2, 1, 2, 2))
    for y1 in range(2):
        for y2 in range(2):
            probs[0, y1, 0, y2, y1] = 0.25
    measure = StrategicMeasure(probs)
    report = validate_lr(measure, spec, tol=1e-9)
    assert not report.passed
    assert report.ci_gap == pytest.approx(0.5, abs=1e-12)
    assert report.kernel_gap <= 1e-12
    assert report.prior_gap <= 1e-12
    assert any(w[0] == "ci" for w in report.witnesses)


def test_prior_mismatch_detected(rng):
    spec = random_team(rng, n_dms=2, min_size=2)
    policy = random_deterministic_policy(rng, spec)
    measure = induce_measure(spec, policy)
    tilted = measure.probs.copy()
    tilted[0] *= 0.5
    tilted /= tilted.sum()
    report = validate_lr(StrategicMeasure(tilted), spec, tol=1e-9)
    assert not report.passed
    assert report.prior_gap > 1e-3


def test_unsupported_cells_are_ignored():
    """Histories with zero probability impose no constraint."""
    spec = copy_corruption_team()
    # Legitimate policy: u2 = y2; then zero out nothing — baseline passes.
    probs = np.zeros((1, 2, 1, 2, 2))
    for y1 in range(2):
        for y2 in range(2):
            probs[0, y1, 0, y2, y2] = 0.25
    assert validate_lr(StrategicMeasure(probs), spec, tol=1e-12).passed
