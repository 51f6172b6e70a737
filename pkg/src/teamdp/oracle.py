"""Naive reference implementations used to verify the solver.

Nothing here shares cost-evaluation code with the model or solver modules:
``path_enumeration_cost`` walks every path with explicit Python loops, and
``brute_force`` builds its own path-weight tensor from scratch.  The point is
independence, not speed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, ShapeMismatchError
from .model import DeterministicPolicy, RandomizedPolicy

DEFAULT_BRUTE_CAP = 10**7


@dataclass(frozen=True)
class OracleResult:
    value: float
    policy: DeterministicPolicy
    policies_evaluated: int


def path_enumeration_cost(spec, policy):
    """Expected cost by explicit enumeration of all (omega0, y, u) paths.

    Written independently from model.expected_cost: outermost loop over the
    measurement path, innermost over actions, no shared helpers.
    """
    n = spec.n_dms
    per_dm = policy.per_dm
    if len(per_dm) != n:
        raise ShapeMismatchError("policy stage count does not match team")
    y_ranges = [range(dm.y_space.size) for dm in spec.dms]
    u_ranges = [range(dm.u_space.size) for dm in spec.dms]
    deterministic = isinstance(policy, DeterministicPolicy)
    total = 0.0
    for ys in itertools.product(*y_ranges):
        for us in itertools.product(*u_ranges):
            pol_weight = 1.0
            for t in range(n):
                if deterministic:
                    if per_dm[t][ys[t]] != us[t]:
                        pol_weight = 0.0
                        break
                else:
                    pol_weight *= float(per_dm[t][ys[t]][us[t]])
            if pol_weight == 0.0:
                continue
            for o in range(spec.omega0.size):
                w = float(spec.prior.probs[o]) * pol_weight
                if w == 0.0:
                    continue
                for t in range(n):
                    hist = (o,)
                    for k in range(t):
                        hist += (ys[k], us[k])
                    w *= float(spec.dms[t].kernel.table[hist + (ys[t],)])
                    if w == 0.0:
                        break
                if w == 0.0:
                    continue
                total += w * float(spec.cost.value[(o,) + us])
    return total


def _path_weight_tensor(spec):
    """W[omega0, y..., u...] = prior * prod_n p_n * cost, built by raw loops."""
    n = spec.n_dms
    shape = (spec.omega0.size,) + spec.y_sizes + spec.u_sizes
    w = np.zeros(shape)
    for o in range(spec.omega0.size):
        p0 = float(spec.prior.probs[o])
        for ys in itertools.product(*[range(s) for s in spec.y_sizes]):
            for us in itertools.product(*[range(s) for s in spec.u_sizes]):
                weight = p0
                for t in range(n):
                    hist = (o,)
                    for k in range(t):
                        hist += (ys[k], us[k])
                    weight *= float(spec.dms[t].kernel.table[hist + (ys[t],)])
                    if weight == 0.0:
                        break
                if weight:
                    w[(o,) + ys + us] = weight * float(spec.cost.value[(o,) + us])
    return w


def brute_force(spec, cap=DEFAULT_BRUTE_CAP):
    """Exhaustive minimum over all deterministic policy tuples.

    Every policy's cost is the sum of the path weights it selects; the full
    cost vector over policies is obtained by contracting the path-weight
    tensor against per-stage policy indicator tensors, which enumerates every
    (policy, path) pair.  Returns the lexicographically first minimizer, whose
    value is re-derived with path_enumeration_cost as a self-check.
    """
    n = spec.n_dms
    total = 1
    for dm in spec.dms:
        total *= dm.u_space.size ** dm.y_space.size
    if total > cap:
        raise CapExceededError(
            f"brute force needs {total} policy evaluations, cap is {cap}",
            required=total,
            cap=cap,
        )

    w = _path_weight_tensor(spec)
    # E_n[p, y, u] = 1 iff stage policy p maps y to u, p in lexicographic
    # order of the action-index tuple.
    ops = [w, list(range(1, 2 * n + 2))]  # axes: 1=omega0, then ys, then us
    stage_counts = []
    for t in range(n):
        ny, nu = spec.dms[t].y_space.size, spec.dms[t].u_space.size
        count = nu**ny
        stage_counts.append(count)
        e = np.zeros((count, ny, nu))
        for p, tab in enumerate(itertools.product(range(nu), repeat=ny)):
            for y, u in enumerate(tab):
                e[p, y, u] = 1.0
        ops += [e, [2 * n + 2 + t, 2 + t, n + 2 + t]]
    out_axes = [2 * n + 2 + t for t in range(n)]
    ops.append(out_axes)
    values = np.einsum(*ops, optimize=True)

    flat_idx = int(np.argmin(values))  # first minimizer in C (lexicographic) order
    idx = np.unravel_index(flat_idx, tuple(stage_counts))
    tables = []
    for t in range(n):
        ny, nu = spec.dms[t].y_space.size, spec.dms[t].u_space.size
        tab = next(itertools.islice(itertools.product(range(nu), repeat=ny), idx[t], None))
        tables.append(tab)
    policy = DeterministicPolicy(tuple(tables))
    value = path_enumeration_cost(spec, policy)
    if abs(value - float(values.flat[flat_idx])) > 1e-9:
        raise AssertionError("brute-force evaluators disagree beyond tolerance")
    return OracleResult(value=value, policy=policy, policies_evaluated=total)


def sample_randomized_policy(spec, rng):
    """Rows drawn uniformly from the simplex via normalized exponentials."""
    per_dm = []
    for dm in spec.dms:
        draws = rng.exponential(size=(dm.y_space.size, dm.u_space.size))
        per_dm.append(draws / draws.sum(axis=1, keepdims=True))
    return RandomizedPolicy(tuple(per_dm))


def randomized_sample(spec, count, seed=0):
    """Minimum path-enumeration cost over `count` sampled randomized policies."""
    if count <= 0:
        return math.inf
    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(count):
        policy = sample_randomized_policy(spec, rng)
        best = min(best, path_enumeration_cost(spec, policy))
    return best
