"""Independent-measurements static reduction via change of measure.

A dynamic team is rewritten so that each DM's measurement is drawn from a
fixed reference measure, independent of everything else; the likelihood
ratios move into the cost.  For every policy the reduced expected cost equals
the original expected cost, which is the defining identity checked by the
tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import AbsoluteContinuityError, CapExceededError, ShapeMismatchError
from .model import (
    CostTable,
    DecisionMaker,
    Distribution,
    FiniteSpace,
    Kernel,
    TeamSpec,
    stage_matrix,
    uniform_distribution,
)


@dataclass(frozen=True)
class ReferenceMeasures:
    """One reference distribution Q_n over Y^n per decision maker."""

    per_dm: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_dm", tuple(self.per_dm))


@dataclass(frozen=True)
class AbsoluteContinuityReport:
    """Failures are (dm index, history index tuple, y index) triples."""

    failures: tuple

    @property
    def ok(self):
        return not self.failures


@dataclass(frozen=True)
class ReducedStaticTeam:
    """Static team with mutually independent measurements.

    ``reduced_cost`` is indexed by (omega0, y^1..y^N, u^1..u^N), first listed
    axis slowest.  It already carries the likelihood-ratio factors, so it may
    depend on the measurement values.
    """

    omega0: FiniteSpace
    prior: Distribution
    per_dm: tuple  # (y_space, u_space, reference Distribution) triples
    reduced_cost: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "per_dm", tuple(self.per_dm))
        arr = np.asarray(self.reduced_cost, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "reduced_cost", arr)

    @property
    def n_dms(self):
        return len(self.per_dm)


def default_references(spec):
    """Uniform Q_n: strictly positive, hence dominating for any kernel."""
    return ReferenceMeasures(tuple(uniform_distribution(dm.y_space) for dm in spec.dms))


def check_absolute_continuity(spec, refs):
    """Every supported kernel cell must be covered by the reference measure."""
    if len(refs.per_dm) != spec.n_dms:
        raise ShapeMismatchError("reference measures do not match team")
    failures = []
    for n, dm in enumerate(spec.dms, start=1):
        q = refs.per_dm[n - 1].probs
        in_sizes = tuple(s.size for s in dm.kernel.input_spaces)
        for hist in np.ndindex(*in_sizes):
            row = dm.kernel.table[hist]
            for y in np.nonzero((row > 0) & (q == 0))[0]:
                failures.append((n, hist, int(y)))
    return AbsoluteContinuityReport(tuple(failures))


def _ratio_factors(spec, refs):
    """f_n = p_n / Q_n with 0/0 := 0, one tensor per DM (kernel axis order)."""
    factors = []
    for n, dm in enumerate(spec.dms, start=1):
        q = refs.per_dm[n - 1].probs
        p = dm.kernel.table
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(p > 0, p / q, 0.0)
        factors.append(f)
    return factors


def static_reduce(spec, refs=None):
    """c_s(omega0, y, u) = c(omega0, u) * prod_n f_n along the path."""
    if refs is None:
        refs = default_references(spec)
    report = check_absolute_continuity(spec, refs)
    if not report.ok:
        raise AbsoluteContinuityError(
            f"{len(report.failures)} kernel cells escape the reference measures",
            failures=report.failures,
        )
    n = spec.n_dms
    factors = _ratio_factors(spec, refs)
    ops = [spec.cost.value, [0] + [n + i for i in range(1, n + 1)]]
    for i in range(1, n + 1):
        subs = [0]
        for k in range(1, i):
            subs += [k, n + k]
        subs.append(i)
        ops += [factors[i - 1], subs]
    ops.append(list(range(0, n + 1)) + [n + i for i in range(1, n + 1)])
    reduced = np.einsum(*ops, optimize=True)
    per_dm = tuple(
        (dm.y_space, dm.u_space, refs.per_dm[i]) for i, dm in enumerate(spec.dms)
    )
    return ReducedStaticTeam(spec.omega0, spec.prior, per_dm, reduced)


def _reduced_stage_matrix(reduced, n, stage):
    y_space, u_space, _ = reduced.per_dm[n - 1]
    arr = np.asarray(stage)
    if arr.ndim == 1:
        if arr.shape != (y_space.size,) or np.any((arr < 0) | (arr >= u_space.size)):
            raise ShapeMismatchError(f"DM {n}: stage table does not match spaces")
        mat = np.zeros((y_space.size, u_space.size))
        mat[np.arange(y_space.size), arr.astype(int)] = 1.0
        return mat
    if arr.shape != (y_space.size, u_space.size):
        raise ShapeMismatchError(f"DM {n}: stage table does not match spaces")
    return arr.astype(float)


def reduced_expected_cost(reduced, policy):
    """Sum over (omega0, y, u) of prior * prod Q_n * policy rows * c_s."""
    n = reduced.n_dms
    if len(policy.per_dm) != n:
        raise ShapeMismatchError("policy stage count does not match reduced team")
    ops = [reduced.prior.probs, [0]]
    for i in range(1, n + 1):
        _, _, q = reduced.per_dm[i - 1]
        ops += [q.probs, [i]]
        ops += [_reduced_stage_matrix(reduced, i, policy.per_dm[i - 1]), [i, n + i]]
    ops += [reduced.reduced_cost, list(range(0, n + 1)) + [n + i for i in range(1, n + 1)]]
    ops.append([])
    return float(np.einsum(*ops, optimize=True))


def with_prior(reduced, probs):
    """Same reduced team with a replaced prior over omega0."""
    return ReducedStaticTeam(
        reduced.omega0,
        Distribution(reduced.omega0, probs),
        reduced.per_dm,
        reduced.reduced_cost,
    )


def as_team_spec(reduced, max_cells=10**8):
    """Re-express a reduced team as a TeamSpec with enlarged omega0.

    omega0 is enlarged to Omega0 x prod Y^k so the cost's dependence on the
    measurement values becomes ordinary omega0 dependence; the kernels become
    deterministic copies of the matching coordinate.  Expected costs agree
    with reduced_expected_cost for every policy.
    """
    n = reduced.n_dms
    y_sizes = [t[0].size for t in reduced.per_dm]
    big = reduced.omega0.size * int(np.prod(y_sizes, dtype=object))
    kernel_cells = 0
    hist = 1
    for i in range(n):
        kernel_cells += big * hist * y_sizes[i]
        hist *= y_sizes[i] * reduced.per_dm[i][1].size
    cost_cells = big * int(np.prod([t[1].size for t in reduced.per_dm], dtype=object))
    if kernel_cells + cost_cells > max_cells:
        raise CapExceededError(
            f"as_team_spec needs {kernel_cells + cost_cells} cells",
            required=kernel_cells + cost_cells,
            cap=max_cells,
        )

    labels = []
    for combo in itertools.product(
        reduced.omega0.labels, *[t[0].labels for t in reduced.per_dm]
    ):
        labels.append(combo)
    omega0 = FiniteSpace(labels)

    ops = [reduced.prior.probs, [0]]
    for i in range(1, n + 1):
        ops += [reduced.per_dm[i - 1][2].probs, [i]]
    ops.append(list(range(0, n + 1)))
    prior = Distribution(omega0, np.einsum(*ops).reshape(-1))

    # y^n index encoded inside the enlarged omega0 index (y^N fastest).
    strides = []
    acc = 1
    for s in reversed(y_sizes):
        strides.append(acc)
        acc *= s
    strides = list(reversed(strides))

    dms = []
    for i in range(1, n + 1):
        y_space, u_space, _ = reduced.per_dm[i - 1]
        in_spaces = (omega0,)
        for k in range(1, i):
            in_spaces += (reduced.per_dm[k - 1][0], reduced.per_dm[k - 1][1])
        delta = np.zeros((big, y_space.size))
        o_idx = np.arange(big)
        y_idx = (o_idx // strides[i - 1]) % y_sizes[i - 1]
        delta[o_idx, y_idx] = 1.0
        shape = tuple(s.size for s in in_spaces) + (y_space.size,)
        table = np.broadcast_to(
            delta.reshape((big,) + (1,) * (2 * (i - 1)) + (y_space.size,)), shape
        ).copy()
        dms.append(DecisionMaker(y_space, u_space, Kernel(in_spaces, y_space, table)))

    u_sizes = tuple(t[1].size for t in reduced.per_dm)
    cost = CostTable(reduced.reduced_cost.reshape((big,) + u_sizes))
    return TeamSpec(omega0, prior, tuple(dms), cost)
