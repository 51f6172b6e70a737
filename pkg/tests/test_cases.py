from fractions import Fraction

import numpy as np
import pytest

from teamdp import cases
from teamdp.model import (
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    expected_cost,
)
from teamdp.oracle import brute_force
from teamdp.reduction import as_team_spec, reduced_expected_cost
from teamdp.solver import solve_exact, stagewise_iterate


# -- discrete counterexample -------------------------------------------------

def test_discrete_builder_y2_size():
    cfg = cases.discrete_config(1.0, "0.1")
    spec = cases.build_discrete_witsenhausen(cfg)
    assert spec.dms[1].y_space.size == 8  # {g +/- 1 : g in the four-point grid}


def test_discrete_policy_cost_is_k_eps_squared():
    for eps in ("0.5", "0.2", "0.1", "0.05"):
        cfg = cases.discrete_config(1.0, eps)
        spec = cases.build_discrete_witsenhausen(cfg)
        policy = cases.discrete_witsenhausen_policy(cfg, spec)
        expected = float(Fraction(eps) ** 2)
        assert abs(expected_cost(spec, policy) - expected) <= 1e-12


def test_discrete_zero_k_has_zero_optimum():
    cfg = cases.discrete_config(0.0, "0.1")
    spec = cases.build_discrete_witsenhausen(cfg)
    assert solve_exact(spec).value == pytest.approx(0.0, abs=1e-12)


def test_refinement_sweep_matches_brute_force():
    rows = cases.refinement_sweep(1.0, ["0.5", "0.2"])
    for (eps, optimum) in rows:
        cfg = cases.discrete_config(1.0, Fraction(eps).limit_denominator(10**12))
        spec = cases.build_discrete_witsenhausen(cfg)
        assert optimum == pytest.approx(brute_force(spec).value, abs=1e-12)


def test_refinement_sweep_bounded_positive_nonincreasing():
    rows = cases.refinement_sweep(1.0, ["0.5", "0.2", "0.1", "0.05"])
    optima = [v for _, v in rows]
    for (eps, optimum) in rows:
        assert 0.0 < optimum <= eps * eps + 1e-12
    assert all(a >= b - 1e-12 for a, b in zip(optima, optima[1:]))


def test_discrete_config_rejects_bad_grids():
    with pytest.raises(ValueError):
        cases.WitsenhausenDiscreteConfig(
            k=1.0, eps=Fraction(1, 10), u1_grid=(1, 0), u2_grid=(0,)
        )
    with pytest.raises(ValueError):
        cases.discrete_config(1.0, "-0.1")


# -- Gaussian variant --------------------------------------------------------

def test_gaussian_ratio_is_one_at_origin():
    cfg = cases.WitsenhausenGaussianConfig(k=0.2, sigma=5.0, bins=21, trunc=3.0)
    red = cases.build_gaussian_witsenhausen(cfg)
    (y1s, u1s, _), (y2s, u2s, _) = red.per_dm
    # middle bin of each axis sits exactly at 0 for odd bin counts
    mid_y2 = y2s.size // 2
    mid_u1 = u1s.size // 2
    assert y2s.labels[mid_y2] == pytest.approx(0.0, abs=1e-12)
    assert u1s.labels[mid_u1] == pytest.approx(0.0, abs=1e-12)
    y1_val = y1s.labels[3]
    u2_val = u2s.labels[5]
    expected_quad = 0.2 * (0.0 - y1_val) ** 2 + (0.0 - u2_val) ** 2
    cell = red.reduced_cost[0, 3, mid_y2, mid_u1, 5]
    assert cell == pytest.approx(expected_quad, abs=1e-12)


def test_gaussian_references_normalized():
    cfg = cases.WitsenhausenGaussianConfig(k=0.2, sigma=5.0, bins=21, trunc=3.0)
    red = cases.build_gaussian_witsenhausen(cfg)
    for _, _, ref in red.per_dm:
        assert ref.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_affine_cost_trivial_points():
    assert cases.affine_cost(1.0, 5.0, 0.0, 0.0) == pytest.approx(25.0, abs=1e-12)
    sigma = 2.0
    b = sigma**2 / (sigma**2 + 1.0)
    at_one = cases.affine_cost(1.0, sigma, 1.0, b)
    assert at_one == pytest.approx((b - 1) ** 2 * sigma**2 + b**2, abs=1e-12)


def test_affine_cost_matches_monte_carlo():
    a, b = 0.63, 0.41
    k, sigma = 0.7, 1.5
    mean, se = cases.monte_carlo_dynamic_cost(
        k, sigma, lambda y: a * y, lambda y: b * y, samples=10**6, seed=5
    )
    assert abs(mean - cases.affine_cost(k, sigma, a, b)) <= 3 * se


def test_quantized_affine_matches_monte_carlo():
    """Reduced-team cost of the grid policy vs simulation of the dynamics."""
    cfg = cases.WitsenhausenGaussianConfig(k=1.0, sigma=1.0, bins=81, trunc=5.0)
    red = cases.build_gaussian_witsenhausen(cfg)
    base = cases.best_affine_baseline(1.0, 1.0, reduced=red)
    policy = cases.quantized_affine_policy(red, base.a, base.b)
    f1, f2 = cases.policy_functions(red, policy)
    mean, se = cases.monte_carlo_dynamic_cost(1.0, 1.0, f1, f2, samples=10**6, seed=7)
    assert abs(mean - base.quantized_value) <= 3 * se


def test_iterate_beats_affine_baseline():
    cfg = cases.WitsenhausenGaussianConfig(k=0.2, sigma=5.0, bins=11, trunc=3.0)
    red = cases.build_gaussian_witsenhausen(cfg)
    base = cases.best_affine_baseline(0.2, 5.0, reduced=red)
    spec = as_team_spec(red)
    init = cases.quantized_affine_policy(red, base.a, base.b)
    result = stagewise_iterate(spec, init=init)
    assert result.value <= base.quantized_value + 1e-9
    assert expected_cost(spec, init) == pytest.approx(base.quantized_value, abs=1e-9)


# -- POMDP encodings ---------------------------------------------------------

def two_state_pomdp(horizon=2, informative=True):
    states = FiniteSpace(("s0", "s1"))
    obs = FiniteSpace(("o0", "o1"))
    actions = FiniteSpace(("a0", "a1"))
    initial = Distribution(states, np.array([0.5, 0.5]))
    transition = Kernel(
        (states, actions), states,
        np.array([[[1.0, 0.0], [0.25, 0.75]], [[0.0, 1.0], [0.75, 0.25]]]),
    )
    rows = np.array([[0.5, 0.5], [0.0, 1.0]]) if informative else np.full((2, 2), 0.5)
    observation = Kernel((states,), obs, rows)
    stage_cost = np.array([[0.0, 1.0], [2.0, 0.3]])
    return cases.PomdpSpec(
        states=states, observations=obs, actions=actions, initial=initial,
        transition=transition, observation=observation, stage_cost=stage_cost,
        horizon=horizon,
    )


def test_pomdp_horizon_one_uninformative():
    pomdp = two_state_pomdp(horizon=1, informative=False)
    team = cases.build_pomdp_team(pomdp)
    value = solve_exact(team).value
    direct = min(
        float(pomdp.initial.probs @ pomdp.stage_cost[:, u]) for u in range(2)
    )
    assert value == pytest.approx(direct, abs=1e-12)
    assert cases.belief_value_iteration(pomdp) == pytest.approx(direct, abs=1e-12)


def test_pomdp_uninformative_equals_open_loop():
    pomdp = two_state_pomdp(horizon=2, informative=False)
    team = cases.build_pomdp_team(pomdp)
    assert solve_exact(team).value == pytest.approx(
        cases.open_loop_value(pomdp), abs=1e-9
    )
    assert cases.belief_value_iteration(pomdp) == pytest.approx(
        cases.open_loop_value(pomdp), abs=1e-9
    )


def test_pomdp_fully_observed_equals_mdp():
    pomdp = two_state_pomdp(horizon=2)
    fully = cases.PomdpSpec(
        states=pomdp.states,
        observations=FiniteSpace(("s0", "s1")),
        actions=pomdp.actions,
        initial=pomdp.initial,
        transition=pomdp.transition,
        observation=Kernel((pomdp.states,), FiniteSpace(("s0", "s1")), np.eye(2)),
        stage_cost=pomdp.stage_cost,
        horizon=2,
    )
    team = cases.build_pomdp_team(fully)
    assert solve_exact(team).value == pytest.approx(
        cases.mdp_backward_induction(fully), abs=1e-9
    )


def test_pomdp_team_matches_belief_recursion_horizon_two():
    pomdp = two_state_pomdp(horizon=2)
    team = cases.build_pomdp_team(pomdp)
    assert abs(solve_exact(team).value - cases.belief_value_iteration(pomdp)) <= 1e-9


def test_belief_vi_never_beats_mdp():
    """Full state information is at least as valuable as partial observation."""
    pomdp = two_state_pomdp(horizon=3)
    assert cases.belief_value_iteration(pomdp) >= cases.mdp_backward_induction(pomdp) - 1e-12
