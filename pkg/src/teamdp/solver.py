"""Exact dynamic programming over measure-valued extended states.

The DP state at stage t is the joint law pi_t of (omega0, y^1..y^t,
u^1..u^{t-1}) as a dense probability tensor.  Stage actions are deterministic
tables Y^t -> U^t (sufficient for the optimum); applying one together with
the next measurement kernel transports pi_t to pi_{t+1}.  Values are memoized
on a canonical quantized key of the tensor.

At the final stage the pairing with the cost is additive across y^N cells, so
the stage-N minimization is done pointwise per measurement value instead of
enumerating the |U|^|Y| tables; this is exact and respects the
lexicographic-first tie-break.  The same decomposition drives the stagewise
verification and the person-by-person iteration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_ordered
from .errors import CapExceededError, ShapeMismatchError
from .model import (
    DEFAULT_POLICY_CAP,
    DeterministicPolicy,
    _kernel_subs,
    enumerate_deterministic_stage_policies,
    expected_cost,
    policy_matrices,
    stage_matrix,
)

DEFAULT_STATE_CAP = 10**6
KEY_QUANTUM = 2.0**-36


def canonical_key(probs):
    """Stable dedup key: entries rounded to the nearest 2^-36, then hashed."""
    arr = np.ascontiguousarray(probs, dtype=float)
    scaled = np.rint(arr / KEY_QUANTUM).astype(np.int64)
    h = hashlib.sha256()
    h.update(np.asarray(arr.shape, dtype=np.int64).tobytes())
    h.update(scaled.tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class StageAction:
    """Deterministic stage policy of DM n: action index per measurement index."""

    n: int
    table: tuple

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(u) for u in self.table))


def _stage_table(stage):
    return stage.table if isinstance(stage, StageAction) else stage


@dataclass(frozen=True)
class ExtendedState:
    """pi_t over Omega0 x Y^1..Y^t x U^1..U^{t-1}, y axes before u axes."""

    t: int
    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def key(self):
        key = getattr(self, "_key", None)
        if key is None:
            key = canonical_key(self.probs)
            object.__setattr__(self, "_key", key)
        return key


@dataclass(frozen=True)
class CoState:
    """Cost-to-go functional on path prefixes.

    Domain: (omega0, y^1..y^{t+1}, u^1..u^t) for t < N, the full path space
    for t = N (where it equals the lifted cost).
    """

    t: int
    values: np.ndarray


@dataclass(frozen=True)
class SolveResult:
    value: float
    policy: DeterministicPolicy
    reachable_counts: tuple
    dedup_hits: int
    sweep_values: tuple = ()


@dataclass(frozen=True)
class StagewiseReport:
    per_stage_gap: tuple
    max_gap: float


def initial_state(spec):
    """pi_1(omega0, y^1) = prior(omega0) p_1(y^1 | omega0)."""
    probs = np.einsum(spec.prior.probs, [0], spec.dms[0].kernel.table, [0, 1], [0, 1])
    return ExtendedState(1, probs)


def _pi_subs(t, n):
    return [0] + list(range(1, t + 1)) + [n + i for i in range(1, t)]


def transition(spec, state, table):
    """pi_{t+1} = pi_t * 1{gamma_t(y^t)=u^t} * p_{t+1}(y^{t+1} | path)."""
    t = state.t
    n = spec.n_dms
    if t >= n:
        raise ShapeMismatchError(f"no transition out of the final stage (t={t})")
    e = stage_matrix(spec, t, _stage_table(table))
    kernel = spec.dms[t].kernel  # measurement of DM t+1
    out = _pi_subs(t + 1, n)
    probs = np.einsum(
        state.probs, _pi_subs(t, n),
        e, [t, n + t],
        kernel.table, _kernel_subs(t + 1, n),
        out,
        optimize=True,
    )
    return ExtendedState(t + 1, probs)


def attach_final_action(spec, state, table):
    """Extend pi_N with the (degenerate) u^N coordinate; full-path measure."""
    n = spec.n_dms
    if state.t != n:
        raise ShapeMismatchError("attach_final_action requires a stage-N state")
    e = stage_matrix(spec, n, _stage_table(table))
    out = [0] + list(range(1, n + 1)) + [n + i for i in range(1, n + 1)]
    return np.einsum(state.probs, _pi_subs(n, n), e, [n, 2 * n], out, optimize=True)


def pair(values, measure):
    """<psi, mu> for tensors on the same path domain."""
    return float(np.einsum(values, list(range(values.ndim)), measure, list(range(values.ndim)), []))


def lifted_cost(spec):
    """The terminal co-state: the cost broadcast to the full path space."""
    n = spec.n_dms
    shape = (spec.omega0.size,) + spec.y_sizes + spec.u_sizes
    c = spec.cost.value.reshape((spec.omega0.size,) + (1,) * n + spec.u_sizes)
    return np.broadcast_to(c, shape).copy()


def costate_step(spec, s, stage, psi):
    """One adjoint step: co-state at stage s -> co-state at stage s-1.

    ``stage`` is DM s's stage policy (deterministic table or row-stochastic
    matrix); ``psi`` is the dense co-state tensor at stage s.
    """
    n = spec.n_dms
    mat = stage_matrix(spec, s, _stage_table(stage))
    if s == n:
        out = [0] + list(range(1, n + 1)) + [n + i for i in range(1, n)]
        return np.einsum(psi, [0] + list(range(1, n + 1)) + [n + i for i in range(1, n + 1)],
                         mat, [n, 2 * n], out, optimize=True)
    psi_subs = [0] + list(range(1, s + 2)) + [n + i for i in range(1, s + 1)]
    out = [0] + list(range(1, s + 1)) + [n + i for i in range(1, s)]
    return np.einsum(
        psi, psi_subs,
        mat, [s, n + s],
        spec.dms[s].kernel.table, _kernel_subs(s + 1, n),
        out,
        optimize=True,
    )


def costate(spec, tail):
    """Co-state at stage t = N - len(tail) under the given tail policies.

    ``tail`` holds the stage policies of DMs t+1..N in order.  The terminal
    co-state is the lifted cost; the first backward step is taken directly
    from the cost table so the full-path tensor is only materialized when the
    caller asks for stage N itself.
    """
    n = spec.n_dms
    t = n - len(tail)
    if t < 0:
        raise ShapeMismatchError("tail has more stages than the team")
    if t == n:
        return CoState(n, lifted_cost(spec))
    mat_n = stage_matrix(spec, n, _stage_table(tail[-1]))
    ones_ops = []
    for k in range(1, n):
        ones_ops += [np.ones(spec.dms[k - 1].y_space.size), [k]]
    out = [0] + list(range(1, n + 1)) + [n + i for i in range(1, n)]
    psi = np.einsum(
        spec.cost.value, [0] + [n + i for i in range(1, n + 1)],
        mat_n, [n, 2 * n],
        *ones_ops,
        out,
        optimize=True,
    )
    s = n - 1
    for stage in reversed(tail[:-1]):
        psi = costate_step(spec, s, stage, psi)
        s -= 1
    assert s == t
    return CoState(t, psi)


def stage_pairing_matrix(spec, state, psi):
    """B[y^t, u^t] such that <psi_t, T_t(gamma)pi_t> = sum_y B[y, gamma(y)].

    For t = N pass psi = None (the cost table is used directly).
    """
    t = state.t
    n = spec.n_dms
    if t == n:
        return np.einsum(
            state.probs, _pi_subs(n, n),
            spec.cost.value, [0] + [n + i for i in range(1, n + 1)],
            [n, 2 * n],
            optimize=True,
        )
    if psi.t != t:
        raise ShapeMismatchError("co-state stage does not match state stage")
    psi_subs = [0] + list(range(1, t + 2)) + [n + i for i in range(1, t + 1)]
    return np.einsum(
        state.probs, _pi_subs(t, n),
        spec.dms[t].kernel.table, _kernel_subs(t + 1, n),
        psi.values, psi_subs,
        [t, n + t],
        optimize=True,
    )


def _final_stage_best(spec, state):
    """Pointwise-minimal final stage: value and the first-minimizer table."""
    b = stage_pairing_matrix(spec, state, None)
    table = tuple(int(i) for i in b.argmin(axis=1))
    value = float(b.min(axis=1).sum())
    return value, table


def solve_exact(spec, policy_cap=DEFAULT_POLICY_CAP, state_cap=DEFAULT_STATE_CAP, memoize=True):
    """Globally optimal value and deterministic policy by backward recursion.

    J_t(pi_t) = min over stage tables of J_{t+1}(T_t(gamma_t) pi_t), with the
    stage-N minimization done pointwise.  Ties break to the lexicographically
    first table; repeated runs (any worker count) return the same policy.
    """
    n = spec.n_dms
    cache = {}
    reach = [set() for _ in range(n)]
    hits = [0]
    candidates = {}

    def stage_candidates(t):
        if t not in candidates:
            candidates[t] = list(enumerate_deterministic_stage_policies(spec, t, cap=policy_cap))
        return candidates[t]

    def evaluate(state):
        t = state.t
        key = state.key
        if memoize and (t, key) in cache:
            hits[0] += 1
            return cache[(t, key)]
        reach[t - 1].add(key)
        if sum(len(r) for r in reach) > state_cap:
            raise CapExceededError(
                f"reachable extended states exceed cap {state_cap}",
                required=sum(len(r) for r in reach),
                cap=state_cap,
            )
        if t == n:
            result = _final_stage_best(spec, state)
        else:
            tables = stage_candidates(t)

            def child_value(tab):
                return evaluate(transition(spec, state, tab))[0]

            values = map_ordered(child_value, tables, parallel=(t == 1))
            best_val = None
            best_tab = None
            for tab, val in zip(tables, values):
                if best_val is None or val < best_val:
                    best_val = val
                    best_tab = tab
            result = (best_val, best_tab)
        if memoize:
            cache[(t, key)] = result
        return result

    state = initial_state(spec)
    tables = []
    value = None
    for t in range(1, n + 1):
        v, tab = evaluate(state)
        if t == 1:
            value = v
        tables.append(tab)
        if t < n:
            state = transition(spec, state, tab)
    return SolveResult(
        value=float(value),
        policy=DeterministicPolicy(tuple(tables)),
        reachable_counts=tuple(len(r) for r in reach),
        dedup_hits=hits[0],
    )


def _prefix_states(spec, mats):
    """pi_1..pi_N generated by the policy prefix."""
    states = [initial_state(spec)]
    for t in range(1, spec.n_dms):
        states.append(transition(spec, states[-1], mats[t - 1]))
    return states


def verify_stagewise(spec, policy, tol=1e-9):
    """Per-stage gap between the policy's pairing and the stage minimum.

    Gap t compares <psi_t, T_t(gamma^t) pi_t> (pi_t from the policy prefix,
    psi_t from the policy tail) with the minimum over all stage actions.
    """
    n = spec.n_dms
    mats = policy_matrices(spec, policy)
    states = _prefix_states(spec, mats)
    gaps = []
    for t in range(1, n + 1):
        psi = costate(spec, mats[t:]) if t < n else None
        b = stage_pairing_matrix(spec, states[t - 1], psi)
        candidate = float(np.einsum(b, [0, 1], mats[t - 1], [0, 1], []))
        best = float(b.min(axis=1).sum())
        gaps.append(candidate - best)
    return StagewiseReport(tuple(gaps), max(gaps))


def stagewise_iterate(spec, init=None, sweeps=50, tol=1e-10):
    """Cyclic person-by-person descent on the co-state pairing.

    Sweeps run t = N..1; each step replaces DM t's table with the pointwise
    minimizer of the pairing given all other stages, so the recorded value
    sequence is non-increasing.  Stops when a full sweep improves by < tol.
    """
    n = spec.n_dms
    if init is None:
        tables = [tuple(0 for _ in range(dm.y_space.size)) for dm in spec.dms]
    else:
        tables = [tuple(t) for t in init.per_dm]
    value = expected_cost(spec, DeterministicPolicy(tuple(tables)))
    step_values = []
    for _ in range(sweeps):
        sweep_start = value
        for t in range(n, 0, -1):
            mats = [stage_matrix(spec, i, tables[i - 1]) for i in range(1, n + 1)]
            states = _prefix_states(spec, mats[: n - 1])
            psi = costate(spec, tables[t:]) if t < n else None
            b = stage_pairing_matrix(spec, states[t - 1], psi)
            tables[t - 1] = tuple(int(i) for i in b.argmin(axis=1))
            value = float(b.min(axis=1).sum())
            step_values.append(value)
        if sweep_start - value < tol:
            break
    return SolveResult(
        value=value,
        policy=DeterministicPolicy(tuple(tables)),
        reachable_counts=(),
        dedup_hits=0,
        sweep_values=tuple(step_values),
    )
