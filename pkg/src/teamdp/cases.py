"""Worked problem families with independent baselines.

Three constructions:

* a two-DM counterexample team with quadratic costs on discretized action
  grids, where the exhibited two-point policy family has cost exactly
  k*eps**2 while the infimum over ever-finer grids tends to zero;
* its Gaussian variant, handed over directly in statically reduced form with
  the likelihood ratio folded into the cost, plus a best-affine baseline and
  a Monte-Carlo evaluator of the original dynamic cost;
* an encoding of finite-horizon partially observed Markov decision processes
  as sequential teams with classical information, cross-checked against
  belief-space and state-space backward inductions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize, stats

from .errors import ShapeMismatchError
from .model import (
    CostTable,
    DecisionMaker,
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    TeamSpec,
    deterministic_kernel,
    perfect_recall_expansion,
)
from .reduction import ReducedStaticTeam, reduced_expected_cost
from .solver import solve_exact

BREAKPOINT_MERGE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Discrete two-point counterexample team
# ---------------------------------------------------------------------------

def _fraction(x):
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(10**12)


@dataclass(frozen=True)
class WitsenhausenDiscreteConfig:
    """Grid instance of the two-DM quadratic team with x, w uniform on {-1,1}.

    Action grids are held as exact rationals so that sums like u1 + w dedup
    exactly; k = 0 is allowed (degenerate but well defined).
    """

    k: float
    eps: Fraction
    u1_grid: tuple
    u2_grid: tuple

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        eps = _fraction(self.eps)
        if eps <= 0:
            raise ValueError("eps must be positive")
        for name in ("u1_grid", "u2_grid"):
            grid = tuple(_fraction(g) for g in getattr(self, name))
            if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
            object.__setattr__(self, name, grid)
        object.__setattr__(self, "eps", eps)


def default_u1_grid(eps):
    eps = _fraction(eps)
    return (-1 - eps, -eps, eps, 1 + eps)


def default_u2_grid(eps):
    eps = _fraction(eps)
    return (-1 - eps, 1 + eps)


def discrete_config(k, eps, u1_grid=None, u2_grid=None):
    eps = _fraction(eps)
    return WitsenhausenDiscreteConfig(
        k=k,
        eps=eps,
        u1_grid=default_u1_grid(eps) if u1_grid is None else u1_grid,
        u2_grid=default_u2_grid(eps) if u2_grid is None else u2_grid,
    )


def build_discrete_witsenhausen(cfg):
    """Team: DM1 sees y1 = x, picks u1; DM2 sees y2 = u1 + w, picks u2.

    Cost k(u1 - x)^2 + (u2 - u1)^2; x, w independent uniform on {-1, 1}.
    Y2 labels are the exact sums u1 + w, deduplicated as rationals.
    """
    xs = (Fraction(-1), Fraction(1))
    ws = (Fraction(-1), Fraction(1))
    omega0 = FiniteSpace(tuple((x, w) for x in xs for w in ws))
    prior = Distribution(omega0, np.full(4, 0.25))

    y1_space = FiniteSpace(xs)
    u1_space = FiniteSpace(cfg.u1_grid)
    kernel1 = deterministic_kernel(
        (omega0,), y1_space, lambda o: xs.index(omega0.labels[o][0])
    )
    dm1 = DecisionMaker(y1_space, u1_space, kernel1)

    y2_labels = tuple(sorted({g + w for g in cfg.u1_grid for w in ws}))
    y2_space = FiniteSpace(y2_labels)
    u2_space = FiniteSpace(cfg.u2_grid)

    def y2_of(o, _y1, u1):
        w = omega0.labels[o][1]
        return y2_labels.index(cfg.u1_grid[u1] + w)

    kernel2 = deterministic_kernel((omega0, y1_space, u1_space), y2_space, y2_of)
    dm2 = DecisionMaker(y2_space, u2_space, kernel2)

    cost = np.empty((4, u1_space.size, u2_space.size))
    for o, (x, _w) in enumerate(omega0.labels):
        for i, u1 in enumerate(cfg.u1_grid):
            for j, u2 in enumerate(cfg.u2_grid):
                cost[o, i, j] = cfg.k * float((u1 - x) ** 2) + float((u2 - u1) ** 2)
    return TeamSpec(omega0, prior, (dm1, dm2), CostTable(cost))


def _nearest_index(grid, value):
    """Index of the grid point closest to value (ties to the smaller point)."""
    best = min(range(len(grid)), key=lambda i: (abs(grid[i] - value), i))
    return best


def discrete_witsenhausen_policy(cfg, spec):
    """The two-point signalling policy: u1 = x + eps*sgn(x); u2 decodes u1.

    DM2 maps y2 in {2+eps, eps} to 1+eps and {-2-eps, -eps} to -1-eps; any
    other y2 value (never reached under this policy) takes the action of the
    nearest listed y2 value.  Expected cost is exactly k*eps**2.
    """
    eps = cfg.eps
    dm1, dm2 = spec.dms
    table1 = []
    for x in dm1.y_space.labels:
        target = x + eps if x > 0 else x - eps
        if target not in cfg.u1_grid:
            raise ShapeMismatchError("signalling actions are not on the u1 grid")
        table1.append(cfg.u1_grid.index(target))

    decode = {2 + eps: 1 + eps, eps: 1 + eps, -2 - eps: -1 - eps, -eps: -1 - eps}
    listed = tuple(decode)
    table2 = []
    for y in dm2.y_space.labels:
        key = y if y in decode else listed[_nearest_index(listed, y)]
        target = decode[key]
        if target not in cfg.u2_grid:
            raise ShapeMismatchError("decoding actions are not on the u2 grid")
        table2.append(cfg.u2_grid.index(target))
    return DeterministicPolicy((tuple(table1), tuple(table2)))


def refinement_sweep(k, eps_list, grid_builder=None):
    """Exact optimum per eps-grid; rows are (eps, optimum) in input order."""
    if grid_builder is None:
        grid_builder = discrete_config
    rows = []
    for eps in eps_list:
        cfg = grid_builder(k, eps)
        result = solve_exact(build_discrete_witsenhausen(cfg))
        rows.append((float(cfg.eps), result.value))
    return tuple(rows)


# ---------------------------------------------------------------------------
# Gaussian variant, delivered in statically reduced form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WitsenhausenGaussianConfig:
    """x ~ N(0, sigma^2) observed by DM1; DM2 sees u1 + w with w ~ N(0, 1)."""

    k: float
    sigma: float
    bins: int = 21
    trunc: float = 3.0

    def __post_init__(self):
        if self.k <= 0 or self.sigma <= 0:
            raise ValueError("k and sigma must be positive")
        if self.bins < 3:
            raise ValueError("bins must be at least 3")
        if self.trunc <= 0:
            raise ValueError("trunc must be positive")


def _gaussian_cells(std, bins, trunc):
    """Equal-width truncated cells: midpoint values and renormalized masses."""
    edges = np.linspace(-trunc * std, trunc * std, bins + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    masses = stats.norm.cdf(edges[1:], scale=std) - stats.norm.cdf(edges[:-1], scale=std)
    return mids, masses / masses.sum()


def build_gaussian_witsenhausen(cfg):
    """Reduced static team on truncated Gaussian grids.

    Both measurements are exogenous (y1 the DM1 observation, y2 a standard
    normal reference draw); the cost carries the density ratio that restores
    the dynamics of y2 = u1 + w:
        (k(u1 - y1)^2 + (u1 - u2)^2) * eta(y2 - u1) / eta(y2).
    """
    y1_vals, y1_mass = _gaussian_cells(cfg.sigma, cfg.bins, cfg.trunc)
    y2_vals, y2_mass = _gaussian_cells(1.0, cfg.bins, cfg.trunc)
    u_lo, u_hi = -cfg.trunc * cfg.sigma - 1.0, cfg.trunc * cfg.sigma + 1.0
    u_vals = np.linspace(u_lo, u_hi, cfg.bins)

    omega0 = FiniteSpace(("*",))
    prior = Distribution(omega0, np.array([1.0]))
    y1_space = FiniteSpace(tuple(float(v) for v in y1_vals))
    y2_space = FiniteSpace(tuple(float(v) for v in y2_vals))
    u1_space = FiniteSpace(tuple(float(v) for v in u_vals))
    u2_space = FiniteSpace(tuple(float(v) for v in u_vals))

    y1 = y1_vals[:, None, None, None]
    y2 = y2_vals[None, :, None, None]
    u1 = u_vals[None, None, :, None]
    u2 = u_vals[None, None, None, :]
    quad = cfg.k * (u1 - y1) ** 2 + (u1 - u2) ** 2
    ratio = stats.norm.pdf(y2 - u1) / stats.norm.pdf(y2)
    reduced_cost = (quad * ratio)[None]

    per_dm = (
        (y1_space, u1_space, Distribution(y1_space, y1_mass)),
        (y2_space, u2_space, Distribution(y2_space, y2_mass)),
    )
    return ReducedStaticTeam(omega0, prior, per_dm, reduced_cost)


@dataclass(frozen=True)
class AffineBaseline:
    a: float
    b: float
    continuous_value: float
    quantized_value: float | None = None


def affine_cost(k, sigma, a, b):
    """E[k(a x - x)^2 + (b(a x + w) - a x)^2], x ~ N(0, sigma^2), w ~ N(0,1)."""
    s2 = sigma * sigma
    return k * (a - 1.0) ** 2 * s2 + (b - 1.0) ** 2 * a * a * s2 + b * b


def quantized_affine_policy(reduced, a, b):
    """u1 = nearest-grid(a * y1), u2 = nearest-grid(b * y2) on a reduced team."""
    (y1_space, u1_space, _), (y2_space, u2_space, _) = reduced.per_dm
    u1_vals = np.asarray(u1_space.labels, dtype=float)
    u2_vals = np.asarray(u2_space.labels, dtype=float)
    table1 = tuple(int(np.argmin(np.abs(u1_vals - a * y))) for y in y1_space.labels)
    table2 = tuple(int(np.argmin(np.abs(u2_vals - b * y))) for y in y2_space.labels)
    return DeterministicPolicy((table1, table2))


def best_affine_baseline(k, sigma, u1_grid=None, u2_grid=None, reduced=None):
    """Best affine pair (u1 = a y1, u2 = b y2) and its grid-quantized cost.

    For fixed a the optimal b is a^2 sigma^2 / (a^2 sigma^2 + 1); the outer
    one-dimensional problem in a is solved numerically.  When a reduced team
    is supplied (its action grids override u1_grid/u2_grid), the quantized
    value is the reduced expected cost of the nearest-grid policy pair.
    """
    s2 = sigma * sigma

    def best_b(a):
        return a * a * s2 / (a * a * s2 + 1.0)

    def objective(a):
        return affine_cost(k, sigma, a, best_b(a))

    res = optimize.minimize_scalar(objective, bounds=(0.0, 1.5), method="bounded",
                                   options={"xatol": 1e-12})
    a = float(res.x)
    b = float(best_b(a))
    quantized = None
    if reduced is not None:
        policy = quantized_affine_policy(reduced, a, b)
        quantized = reduced_expected_cost(reduced, policy)
    return AffineBaseline(a=a, b=b, continuous_value=float(res.fun), quantized_value=quantized)


def grid_quantizer(labels):
    """Map continuous values to indices of equal-width cells with the given
    midpoints, clipping beyond the first/last cell."""
    mids = np.asarray(labels, dtype=float)
    width = mids[1] - mids[0]
    lo = mids[0] - width / 2.0
    n = len(mids)

    def quantize(values):
        return np.clip(np.floor((np.asarray(values) - lo) / width).astype(int), 0, n - 1)

    return quantize


def policy_functions(reduced, policy):
    """Continuous-observation versions of a reduced-team policy pair.

    Each returned function quantizes its observation to the team's grid cell
    and emits the action value the table assigns to that cell, so Monte-Carlo
    simulation sees exactly the information pattern of the discretized team.
    """
    (y1_space, u1_space, _), (y2_space, u2_space, _) = reduced.per_dm
    u1_vals = np.asarray(u1_space.labels, dtype=float)
    u2_vals = np.asarray(u2_space.labels, dtype=float)
    t1 = np.asarray(policy.per_dm[0], dtype=int)
    t2 = np.asarray(policy.per_dm[1], dtype=int)
    q1 = grid_quantizer(y1_space.labels)
    q2 = grid_quantizer(y2_space.labels)
    return (lambda y: u1_vals[t1[q1(y)]]), (lambda y: u2_vals[t2[q2(y)]])


def monte_carlo_dynamic_cost(k, sigma, f1, f2, samples=10**6, seed=0):
    """Monte-Carlo estimate of the dynamic cost of the policy pair (f1, f2).

    f1 maps DM1's observation y1 = x to u1; DM2 then sees y2 = u1 + w.
    Returns (mean, standard error).
    """
    rng = np.random.default_rng(seed)
    y1 = rng.normal(0.0, sigma, size=samples)
    w = rng.normal(0.0, 1.0, size=samples)
    u1 = f1(y1)
    u2 = f2(u1 + w)
    costs = k * (u1 - y1) ** 2 + (u2 - u1) ** 2
    return float(costs.mean()), float(costs.std(ddof=1) / np.sqrt(samples))


# ---------------------------------------------------------------------------
# POMDPs as sequential teams with classical information
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PomdpSpec:
    """Finite POMDP: x_{t+1} ~ transition(x_t, u_t), y_t ~ observation(x_t).

    Total cost is the sum of stage_cost(x_t, u_t) over t = 1..horizon.
    """

    states: FiniteSpace
    observations: FiniteSpace
    actions: FiniteSpace
    initial: Distribution
    transition: Kernel
    observation: Kernel
    stage_cost: np.ndarray
    horizon: int

    def __post_init__(self):
        arr = np.asarray(self.stage_cost, dtype=float).copy()
        if arr.shape != (self.states.size, self.actions.size):
            raise ShapeMismatchError("stage_cost must be states x actions")
        arr.setflags(write=False)
        object.__setattr__(self, "stage_cost", arr)
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


def _uniformizer_intervals(rows):
    """Common interval partition of [0,1) representing several distributions.

    Breakpoints are the union of the rows' cumulative sums (merged within
    BREAKPOINT_MERGE_TOL); each surviving interval carries its width as mass
    and, per row, the outcome index whose cumulative span covers it.
    Returns (masses, outcomes) with outcomes of shape (n_intervals, n_rows).
    """
    rows = np.asarray(rows, dtype=float)
    points = [1.0]
    for row in rows:
        points.extend(np.cumsum(row)[:-1])
    points = sorted(p for p in points if p > BREAKPOINT_MERGE_TOL)
    merged = []
    for p in points:
        if not merged or p - merged[-1] > BREAKPOINT_MERGE_TOL:
            merged.append(p)
    merged[-1] = 1.0
    edges = np.array([0.0] + merged)
    masses = np.diff(edges)
    reps = 0.5 * (edges[:-1] + edges[1:])
    outcomes = np.empty((len(reps), len(rows)), dtype=int)
    for r, row in enumerate(rows):
        cum = np.cumsum(row)
        cum[-1] = 1.0
        outcomes[:, r] = np.searchsorted(cum, reps, side="right")
    return masses, outcomes


def build_pomdp_team(pomdp, expand=True):
    """Sequential-team encoding with all randomness packed into omega0.

    omega0 = (initial state, one observation-noise level per stage, one
    transition-noise level per stage but the last), using inverse-transform
    uniformizers so the state/observation trajectory is a deterministic
    function of omega0 and the action prefix.  DM t observes y_t; with
    ``expand`` the perfect-recall expansion is applied, giving each DM the
    full history (y_{<t}, u_{<t}, y_t) — a classical information structure.
    """
    T = pomdp.horizon
    n_states = pomdp.states.size
    n_actions = pomdp.actions.size

    obs_rows = pomdp.observation.table.reshape(n_states, -1)
    obs_mass, obs_out = _uniformizer_intervals(obs_rows)
    trans_rows = pomdp.transition.table.reshape(n_states * n_actions, -1)
    trans_mass, trans_out = _uniformizer_intervals(trans_rows)
    trans_out = trans_out.T.reshape(n_states, n_actions, -1)  # [x, u, level]
    n_obs_levels = len(obs_mass)
    n_trans_levels = len(trans_mass)

    labels = []
    probs = []
    for x0 in range(n_states):
        for vs in itertools.product(range(n_obs_levels), repeat=T):
            for ws in itertools.product(range(n_trans_levels), repeat=T - 1):
                labels.append((pomdp.states.labels[x0],) + vs + ws)
                p = float(pomdp.initial.probs[x0])
                for v in vs:
                    p *= obs_mass[v]
                for w in ws:
                    p *= trans_mass[w]
                probs.append(p)
    omega0 = FiniteSpace(tuple(labels))
    prior = Distribution(omega0, np.array(probs))

    seeds = []
    for x0 in range(n_states):
        for vs in itertools.product(range(n_obs_levels), repeat=T):
            for ws in itertools.product(range(n_trans_levels), repeat=T - 1):
                seeds.append((x0, vs, ws))

    def trajectory(o, actions):
        """States x_1..x_{len(actions)+1 capped at T} and observations."""
        x0, vs, ws = seeds[o]
        x = x0
        xs = [x]
        for t, u in enumerate(actions):
            if t >= T - 1:
                break
            x = int(trans_out[x, u, ws[t]])
            xs.append(x)
        return xs, vs

    dms = []
    for t in range(1, T + 1):
        in_spaces = (omega0,)
        for _ in range(t - 1):
            in_spaces += (pomdp.observations, pomdp.actions)
        in_sizes = tuple(s.size for s in in_spaces)
        table = np.zeros(in_sizes + (pomdp.observations.size,))
        for o in range(omega0.size):
            for us in itertools.product(range(n_actions), repeat=t - 1):
                xs, vs = trajectory(o, us)
                y = int(obs_out[vs[t - 1], xs[t - 1]])
                sel = [o]
                for u in us:
                    sel += [slice(None), u]
                table[tuple(sel) + (y,)] = 1.0
        kernel = Kernel(in_spaces, pomdp.observations, table)
        dms.append(DecisionMaker(pomdp.observations, pomdp.actions, kernel))

    cost = np.zeros((omega0.size,) + (n_actions,) * T)
    for o in range(omega0.size):
        for us in itertools.product(range(n_actions), repeat=T):
            xs, _ = trajectory(o, us)
            cost[(o,) + us] = sum(pomdp.stage_cost[xs[t], us[t]] for t in range(T))
    spec = TeamSpec(omega0, prior, tuple(dms), CostTable(cost))
    return perfect_recall_expansion(spec) if expand else spec


def belief_value_iteration(pomdp):
    """Exact finite-horizon optimum by recursion on the reachable belief tree.

    The belief entering stage t is the law of x_t given past observations and
    actions; each stage averages over the observation, takes the Bayes
    posterior, and minimizes stage cost plus continuation over the action.
    """
    T = pomdp.horizon
    obs = pomdp.observation.table.reshape(pomdp.states.size, -1)
    trans = pomdp.transition.table.reshape(
        pomdp.states.size, pomdp.actions.size, pomdp.states.size
    )

    def value(belief, t):
        if t > T:
            return 0.0
        total = 0.0
        for y in range(pomdp.observations.size):
            joint = belief * obs[:, y]
            p_y = joint.sum()
            if p_y <= 1e-15:
                continue
            posterior = joint / p_y
            best = np.inf
            for u in range(pomdp.actions.size):
                stage = float(posterior @ pomdp.stage_cost[:, u])
                if t < T:
                    stage += value(posterior @ trans[:, u, :], t + 1)
                best = min(best, stage)
            total += p_y * best
        return total

    return float(value(pomdp.initial.probs.copy(), 1))


def mdp_backward_induction(pomdp):
    """Optimal cost under full state observation (the observation is ignored)."""
    T = pomdp.horizon
    trans = pomdp.transition.table.reshape(
        pomdp.states.size, pomdp.actions.size, pomdp.states.size
    )
    v = np.zeros(pomdp.states.size)
    for _ in range(T):
        q = pomdp.stage_cost + trans @ v
        v = q.min(axis=1)
    return float(pomdp.initial.probs @ v)


def open_loop_value(pomdp):
    """Minimum expected cost over fixed action sequences (no feedback)."""
    T = pomdp.horizon
    trans = pomdp.transition.table.reshape(
        pomdp.states.size, pomdp.actions.size, pomdp.states.size
    )
    best = np.inf
    for us in itertools.product(range(pomdp.actions.size), repeat=T):
        dist = pomdp.initial.probs.copy()
        total = 0.0
        for t in range(T):
            total += float(dist @ pomdp.stage_cost[:, us[t]])
            dist = dist @ trans[:, us[t], :]
        best = min(best, total)
    return float(best)
