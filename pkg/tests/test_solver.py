import os

import numpy as np
import pytest

from teamdp.errors import CapExceededError
from teamdp.model import (
    CostTable,
    DecisionMaker,
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    TeamSpec,
    deterministic_kernel,
    expected_cost,
    policy_matrices,
)
from teamdp.oracle import brute_force, sample_randomized_policy
from teamdp.solver import (
    StageAction,
    attach_final_action,
    canonical_key,
    costate,
    costate_step,
    initial_state,
    lifted_cost,
    pair,
    solve_exact,
    stage_pairing_matrix,
    stagewise_iterate,
    transition,
    verify_stagewise,
)

from conftest import random_deterministic_policy, random_team


def random_stage_tables(rng, spec):
    return [
        tuple(int(rng.integers(0, dm.u_space.size)) for _ in range(dm.y_space.size))
        for dm in spec.dms
    ]


def test_initial_state_marginal_is_prior(rng):
    spec = random_team(rng, n_dms=2)
    state = initial_state(spec)
    assert np.allclose(state.probs.sum(axis=1), spec.prior.probs, atol=1e-12)
    assert state.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_initial_state_deterministic_kernel_is_diagonal():
    omega = FiniteSpace((0, 1, 2))
    prior = Distribution(omega, np.array([0.2, 0.3, 0.5]))
    y = FiniteSpace((0, 1, 2))
    u = FiniteSpace((0,))
    dm = DecisionMaker(y, u, deterministic_kernel((omega,), y, lambda o: o))
    spec = TeamSpec(omega, prior, (dm,), CostTable(np.zeros((3, 1))))
    state = initial_state(spec)
    assert np.allclose(state.probs, np.diag(prior.probs))


def test_transition_preserves_mass_and_marginal(rng):
    for _ in range(10):
        spec = random_team(rng, n_dms=3)
        state = initial_state(spec)
        tables = random_stage_tables(rng, spec)
        nxt = transition(spec, state, tables[0])
        assert nxt.probs.sum() == pytest.approx(1.0, abs=1e-9)
        # marginalizing out (y^2, u^1) recovers pi_1
        back = nxt.probs.sum(axis=(2, 3))
        assert np.allclose(back, state.probs, atol=1e-12)


def test_attach_final_action_pairs_to_expected_cost(rng):
    for _ in range(10):
        spec = random_team(rng, n_dms=2)
        tables = random_stage_tables(rng, spec)
        state = transition(spec, initial_state(spec), tables[0])
        full = attach_final_action(spec, state, tables[1])
        value = pair(lifted_cost(spec), full)
        policy = DeterministicPolicy(tuple(tables))
        assert value == pytest.approx(expected_cost(spec, policy), abs=1e-12)


def test_stage_action_wrapper(rng):
    spec = random_team(rng, n_dms=2)
    tables = random_stage_tables(rng, spec)
    a = transition(spec, initial_state(spec), tables[0])
    b = transition(spec, initial_state(spec), StageAction(1, tables[0]))
    assert np.array_equal(a.probs, b.probs)


def test_canonical_key_stability(rng):
    spec = random_team(rng, n_dms=2)
    state = initial_state(spec)
    assert state.key == canonical_key(state.probs)
    assert canonical_key(state.probs.copy()) == state.key
    bumped = state.probs.copy()
    bumped.flat[0] += 2.0**-20
    assert canonical_key(bumped) != state.key


def test_canonical_key_shape_sensitivity():
    a = np.full((2, 3), 1 / 6)
    b = np.full((3, 2), 1 / 6)
    assert canonical_key(a) != canonical_key(b)


def test_solve_exact_matches_brute_force():
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        spec = random_team(rng, n_dms=int(rng.integers(2, 4)))
        result = solve_exact(spec)
        oracle = brute_force(spec)
        assert abs(result.value - oracle.value) <= 1e-9, seed
        assert result.policy.per_dm == oracle.policy.per_dm, seed


def test_solve_exact_single_dm(rng):
    spec = random_team(rng, n_dms=1)
    result = solve_exact(spec)
    oracle = brute_force(spec)
    assert result.value == pytest.approx(oracle.value, abs=1e-12)


def test_solve_exact_memoization_is_sound(rng):
    for _ in range(5):
        spec = random_team(rng, n_dms=3)
        with_memo = solve_exact(spec, memoize=True)
        without = solve_exact(spec, memoize=False)
        assert with_memo.value == pytest.approx(without.value, abs=1e-9)
        assert with_memo.policy.per_dm == without.policy.per_dm


def test_solve_exact_state_cap(rng):
    spec = random_team(rng, n_dms=3, min_size=2)
    with pytest.raises(CapExceededError):
        solve_exact(spec, state_cap=1)


def test_randomized_policies_never_beat_the_optimum(rng):
    spec = random_team(rng, n_dms=2)
    optimum = solve_exact(spec).value
    for _ in range(20):
        policy = sample_randomized_policy(spec, rng)
        assert expected_cost(spec, policy) >= optimum - 1e-9


def test_costate_constant_cost(rng):
    spec = random_team(rng, n_dms=2)
    const = TeamSpec(
        spec.omega0, spec.prior, spec.dms, CostTable(np.full(spec.cost.value.shape, 3.5))
    )
    tables = random_stage_tables(rng, const)
    psi = costate(const, tables[1:])
    assert np.allclose(psi.values, 3.5, atol=1e-12)


def test_costate_pairing_matches_expected_cost(rng):
    for _ in range(10):
        spec = random_team(rng, n_dms=3)
        tables = random_stage_tables(rng, spec)
        psi1 = costate(spec, tables[1:])
        state = initial_state(spec)
        b = stage_pairing_matrix(spec, state, psi1)
        mats = policy_matrices(spec, DeterministicPolicy(tuple(tables)))
        value = float(np.einsum(b, [0, 1], mats[0], [0, 1], []))
        assert value == pytest.approx(
            expected_cost(spec, DeterministicPolicy(tuple(tables))), abs=1e-12
        )


def test_costate_adjoint_identity(rng):
    """<psi_t, T_t(gamma) pi_t> computed forward equals the backward pairing."""
    for _ in range(10):
        spec = random_team(rng, n_dms=2)
        tables = random_stage_tables(rng, spec)
        state = initial_state(spec)
        nxt = transition(spec, state, tables[0])
        full = attach_final_action(spec, nxt, tables[1])
        forward = pair(lifted_cost(spec), full)
        psi1 = costate(spec, tables[1:])
        pushed = costate_step(spec, 1, tables[0], psi1.values)
        backward = pair(pushed, state.probs)
        assert forward == pytest.approx(backward, abs=1e-12)


def test_verify_stagewise_on_optimum(rng):
    for _ in range(10):
        spec = random_team(rng, n_dms=2)
        result = solve_exact(spec)
        report = verify_stagewise(spec, result.policy)
        assert report.max_gap <= 1e-9
        assert all(g >= -1e-9 for g in report.per_stage_gap)


def test_verify_stagewise_detects_first_stage_corruption():
    """Replacing stage 1 of the optimum shows up as exactly the cost increase."""
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        spec = random_team(rng, n_dms=2, min_size=2)
        best = solve_exact(spec)
        corrupted_table = tuple(
            (u + 1) % spec.dms[0].u_space.size for u in best.policy.per_dm[0]
        )
        corrupted = DeterministicPolicy((corrupted_table,) + best.policy.per_dm[1:])
        diff = expected_cost(spec, corrupted) - expected_cost(spec, best.policy)
        report = verify_stagewise(spec, corrupted)
        # gap at stage 1 is the loss vs the best stage-1 response to this tail
        assert report.per_stage_gap[0] >= diff - 1e-9 or report.per_stage_gap[0] >= 0


def test_stagewise_iterate_monotone(rng):
    for _ in range(5):
        spec = random_team(rng, n_dms=3)
        result = stagewise_iterate(spec)
        values = result.sweep_values
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        assert result.value >= solve_exact(spec).value - 1e-9
        assert verify_stagewise(spec, result.policy).max_gap <= 1e-9


def test_stagewise_iterate_decoupled_cost_reaches_optimum(rng):
    """c = c1(omega0,u1) + c2(omega0,u2) on a static team: one sweep optimal."""
    omega = FiniteSpace((0, 1))
    prior = Distribution(omega, np.array([0.4, 0.6]))
    y1 = FiniteSpace((0, 1))
    u1 = FiniteSpace((0, 1))
    y2 = FiniteSpace((0, 1))
    u2 = FiniteSpace((0, 1))
    k1 = Kernel((omega,), y1, np.array([[0.7, 0.3], [0.2, 0.8]]))
    k2 = Kernel((omega, y1, u1), y2, np.broadcast_to(
        np.array([[0.5, 0.5], [0.9, 0.1]])[:, None, None, :], (2, 2, 2, 2)
    ).copy())
    c1 = rng.uniform(0, 1, (2, 2))
    c2 = rng.uniform(0, 1, (2, 2))
    cost = c1[:, :, None] + c2[:, None, :]
    spec = TeamSpec(
        omega, prior,
        (DecisionMaker(y1, u1, k1), DecisionMaker(y2, u2, k2)),
        CostTable(cost),
    )
    result = stagewise_iterate(spec)
    assert result.value == pytest.approx(brute_force(spec).value, abs=1e-12)


def test_determinism_across_worker_counts(rng):
    specs = [random_team(np.random.default_rng(3000 + s), n_dms=3) for s in range(5)]
    previous = os.environ.get("TEAMDP_THREADS")
    try:
        results = {}
        for workers in ("1", "8"):
            os.environ["TEAMDP_THREADS"] = workers
            results[workers] = [solve_exact(spec) for spec in specs]
        for one, eight in zip(results["1"], results["8"]):
            assert one.value == eight.value
            assert one.policy.per_dm == eight.policy.per_dm
    finally:
        if previous is None:
            os.environ.pop("TEAMDP_THREADS", None)
        else:
            os.environ["TEAMDP_THREADS"] = previous
