"""Shared builders for randomized team instances."""

import numpy as np
import pytest

from teamdp.model import (
    CostTable,
    DecisionMaker,
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    TeamSpec,
)


def random_team(rng, n_dms=2, max_size=3, min_size=1):
    """Random valid team: Dirichlet kernels, uniform[0,1] costs."""
    omega = FiniteSpace(tuple(range(int(rng.integers(min_size, max_size + 1)))))
    prior = Distribution(omega, rng.dirichlet(np.ones(omega.size)))
    dms = []
    history = [omega]
    for _ in range(n_dms):
        y = FiniteSpace(tuple(range(int(rng.integers(min_size, max_size + 1)))))
        u = FiniteSpace(tuple(range(int(rng.integers(min_size, max_size + 1)))))
        in_spaces = tuple(history)
        in_sizes = tuple(s.size for s in in_spaces)
        table = rng.dirichlet(np.ones(y.size), size=in_sizes).reshape(
            in_sizes + (y.size,)
        )
        dms.append(DecisionMaker(y, u, Kernel(in_spaces, y, table)))
        history += [y, u]
    cost = rng.uniform(0.0, 1.0, size=(omega.size,) + tuple(d.u_space.size for d in dms))
    return TeamSpec(omega, prior, tuple(dms), CostTable(cost))


def random_deterministic_policy(rng, spec):
    return DeterministicPolicy(
        tuple(
            tuple(int(rng.integers(0, dm.u_space.size)) for _ in range(dm.y_space.size))
            for dm in spec.dms
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
