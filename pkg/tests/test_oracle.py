import itertools
import math

import numpy as np
import pytest

from teamdp.errors import CapExceededError
from teamdp.model import (
    DeterministicPolicy,
    enumerate_deterministic_stage_policies,
    expected_cost,
)
from teamdp.oracle import (
    brute_force,
    path_enumeration_cost,
    randomized_sample,
    sample_randomized_policy,
)

from conftest import random_team


def test_brute_force_matches_direct_enumeration(rng):
    """The vectorized search agrees with a literal loop over all policies."""
    for _ in range(5):
        spec = random_team(rng, n_dms=2)
        result = brute_force(spec)
        best = math.inf
        best_policy = None
        for tabs in itertools.product(
            *[enumerate_deterministic_stage_policies(spec, n) for n in (1, 2)]
        ):
            value = expected_cost(spec, DeterministicPolicy(tabs))
            if value < best - 1e-15:
                best = value
                best_policy = tabs
        assert result.value == pytest.approx(best, abs=1e-12)
        assert result.policy.per_dm == best_policy


def test_brute_force_counts_policies(rng):
    spec = random_team(rng, n_dms=2)
    result = brute_force(spec)
    expected = 1
    for dm in spec.dms:
        expected *= dm.u_space.size ** dm.y_space.size
    assert result.policies_evaluated == expected


def test_brute_force_cap(rng):
    spec = random_team(rng, n_dms=3, min_size=3)
    with pytest.raises(CapExceededError) as err:
        brute_force(spec, cap=10)
    assert err.value.required > 10


def test_path_enumeration_handles_randomized(rng):
    spec = random_team(rng, n_dms=2)
    policy = sample_randomized_policy(spec, rng)
    value = path_enumeration_cost(spec, policy)
    assert value == pytest.approx(expected_cost(spec, policy), abs=1e-12)


def test_randomized_sample_upper_bounds_optimum(rng):
    spec = random_team(rng, n_dms=2)
    optimum = brute_force(spec).value
    sampled = randomized_sample(spec, count=30, seed=3)
    assert sampled >= optimum - 1e-9


def test_randomized_sample_empty():
    assert randomized_sample(None, count=0) == math.inf
