"""Finite sequential team models: spaces, distributions, kernels, costs, policies.

Layout convention used everywhere in this package: tables are stored in
lexicographic order with the *first listed space slowest* (i.e. plain C order
over the listed axes).  A kernel for decision maker ``n`` takes the inputs
``(omega0, Y^1, U^1, ..., Y^{n-1}, U^{n-1})`` in that order and outputs a
distribution over ``Y^n``.  The cost table is indexed by
``(omega0, U^1, ..., U^N)``.

All objects are immutable after construction and all operations are pure
functions, so everything here is safe to share across workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, ShapeMismatchError

NORM_TOL = 1e-9
DEFAULT_POLICY_CAP = 10**7
DEFAULT_CELL_CAP = 10**8


def _readonly(a):
    arr = np.asarray(a, dtype=float)
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteSpace:
    """An ordered finite set; index order is the canonical enumeration order."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def size(self):
        return len(self.labels)

    def index(self, label):
        return self.labels.index(label)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class Distribution:
    """A probability vector over a FiniteSpace."""

    space: FiniteSpace
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))

    def problems(self, name="distribution"):
        out = []
        if self.probs.shape != (self.space.size,):
            out.append(f"{name}: length {self.probs.shape} != space size {self.space.size}")
            return out
        if np.any(self.probs < 0):
            out.append(f"{name}: negative entry at index {int(np.argmin(self.probs))}")
        s = float(self.probs.sum())
        if abs(s - 1.0) > NORM_TOL:
            out.append(f"{name}: sums to {s!r}, not 1 within {NORM_TOL}")
        return out


@dataclass(frozen=True)
class Kernel:
    """A stochastic kernel: one Distribution row per input tuple.

    ``table`` has shape ``(*input sizes, output size)``; row order is
    lexicographic over the input spaces, first space slowest.
    """

    input_spaces: tuple
    output_space: FiniteSpace
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input_spaces", tuple(self.input_spaces))
        shape = tuple(s.size for s in self.input_spaces) + (self.output_space.size,)
        arr = np.asarray(self.table, dtype=float)
        if arr.size != int(np.prod(shape)):
            raise ShapeMismatchError(
                f"kernel table has {arr.size} entries, expected {int(np.prod(shape))}"
            )
        object.__setattr__(self, "table", _readonly(arr.reshape(shape)))

    @property
    def n_rows(self):
        return int(np.prod([s.size for s in self.input_spaces], dtype=object)) if self.input_spaces else 1

    def rows(self):
        return self.table.reshape(-1, self.output_space.size)

    def problems(self, name="kernel"):
        out = []
        rows = self.rows()
        if np.any(rows < 0):
            bad = np.argwhere(rows < 0)[0]
            out.append(f"{name}: negative entry in row {int(bad[0])}")
        sums = rows.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > NORM_TOL)[0]
        for i in bad[:10]:
            out.append(f"{name}: row {int(i)} sums to {float(sums[i])!r}, not 1 within {NORM_TOL}")
        return out


@dataclass(frozen=True)
class CostTable:
    """Non-negative cost over (omega0, U^1, ..., U^N), omega0 slowest."""

    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", _readonly(self.value))


@dataclass(frozen=True)
class DecisionMaker:
    y_space: FiniteSpace
    u_space: FiniteSpace
    kernel: Kernel


@dataclass(frozen=True)
class TeamSpec:
    """The intrinsic model of a finite sequential team.

    Exogenous randomness beyond ``omega0`` is carried by the measurement
    kernels; a team whose cost needs a richer exogenous variable must encode
    it inside ``omega0``.
    """

    omega0: FiniteSpace
    prior: Distribution
    dms: tuple
    cost: CostTable

    def __post_init__(self):
        object.__setattr__(self, "dms", tuple(self.dms))

    @property
    def n_dms(self):
        return len(self.dms)

    @property
    def y_sizes(self):
        return tuple(dm.y_space.size for dm in self.dms)

    @property
    def u_sizes(self):
        return tuple(dm.u_space.size for dm in self.dms)

    def cost_shape(self):
        return (self.omega0.size,) + self.u_sizes


@dataclass(frozen=True)
class DeterministicPolicy:
    """Per DM, a table assigning an action index to each measurement index."""

    per_dm: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_dm", tuple(tuple(int(a) for a in t) for t in self.per_dm))


@dataclass(frozen=True)
class RandomizedPolicy:
    """Per DM, a row-stochastic table over U^n indexed by Y^n."""

    per_dm: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_dm", tuple(_readonly(t) for t in self.per_dm))


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple

    @property
    def ok(self):
        return not self.problems


# ---------------------------------------------------------------------------
# einsum subscript helpers.  Global axis ids: 0 = omega0, n = Y^n, N + n = U^n.


def _kernel_subs(n, n_dms):
    subs = [0]
    for i in range(1, n):
        subs += [i, n_dms + i]
    subs.append(n)
    return subs


def _cost_subs(n_dms):
    return [0] + [n_dms + i for i in range(1, n_dms + 1)]


def validate_team(spec):
    """Collect every violated invariant; empty report iff the spec is valid."""
    problems = []
    n = spec.n_dms
    if n < 1:
        problems.append("team has no decision makers")
    problems += spec.prior.problems("prior")
    if spec.prior.space is not spec.omega0 and spec.prior.space != spec.omega0:
        problems.append("prior is not a distribution over omega0")
    if len(set(spec.omega0.labels)) != spec.omega0.size:
        problems.append("omega0 labels are not distinct")
    for i, dm in enumerate(spec.dms, start=1):
        name = f"DM {i}"
        if len(set(dm.y_space.labels)) != dm.y_space.size:
            problems.append(f"{name}: measurement labels are not distinct")
        if len(set(dm.u_space.labels)) != dm.u_space.size:
            problems.append(f"{name}: action labels are not distinct")
        expected = (spec.omega0,)
        for j in range(1, i):
            expected += (spec.dms[j - 1].y_space, spec.dms[j - 1].u_space)
        if len(dm.kernel.input_spaces) != 2 * i - 1:
            problems.append(
                f"{name}: kernel arity {len(dm.kernel.input_spaces)} != {2 * i - 1}"
            )
        elif tuple(dm.kernel.input_spaces) != expected:
            problems.append(f"{name}: kernel input spaces are not (omega0, history)")
        if dm.kernel.output_space != dm.y_space:
            problems.append(f"{name}: kernel output space is not Y^{i}")
        problems += dm.kernel.problems(f"{name} kernel")
    shape = spec.cost_shape()
    if spec.cost.value.shape != shape:
        problems.append(f"cost table shape {spec.cost.value.shape} != {shape}")
    else:
        if np.any(spec.cost.value < 0):
            problems.append("cost table has a negative entry")
        if not np.all(np.isfinite(spec.cost.value)):
            problems.append("cost table has a non-finite entry")
    return ValidationReport(tuple(problems))


def stage_matrix(spec, n, stage):
    """Row-stochastic (|Y^n|, |U^n|) matrix for one DM's stage policy.

    ``stage`` is either a sequence of action indices (deterministic table) or
    an array-like row-stochastic table.
    """
    dm = spec.dms[n - 1]
    arr = np.asarray(stage)
    if arr.ndim == 1:
        if arr.shape != (dm.y_space.size,):
            raise ShapeMismatchError(
                f"DM {n}: stage table length {arr.shape[0]} != |Y|={dm.y_space.size}"
            )
        if np.any((arr < 0) | (arr >= dm.u_space.size)):
            raise ShapeMismatchError(f"DM {n}: action index out of range")
        mat = np.zeros((dm.y_space.size, dm.u_space.size))
        mat[np.arange(dm.y_space.size), arr.astype(int)] = 1.0
        return mat
    if arr.shape != (dm.y_space.size, dm.u_space.size):
        raise ShapeMismatchError(
            f"DM {n}: stage table shape {arr.shape} != ({dm.y_space.size}, {dm.u_space.size})"
        )
    return arr.astype(float)


def policy_matrices(spec, policy):
    """Stage matrices for a full policy, with shape checking."""
    per_dm = policy.per_dm
    if len(per_dm) != spec.n_dms:
        raise ShapeMismatchError(
            f"policy has {len(per_dm)} stages, team has {spec.n_dms}"
        )
    return [stage_matrix(spec, n, per_dm[n - 1]) for n in range(1, spec.n_dms + 1)]


def expected_cost(spec, policy):
    """E[c(omega0, u)] under the team law and the given policy.

    Evaluated as a single tensor contraction over
    prior x kernels x policy rows x cost; deterministic order, result >= 0.
    """
    n = spec.n_dms
    mats = policy_matrices(spec, policy)
    ops = [spec.prior.probs, [0]]
    for i in range(1, n + 1):
        ops += [spec.dms[i - 1].kernel.table, _kernel_subs(i, n)]
        ops += [mats[i - 1], [i, n + i]]
    ops += [spec.cost.value, _cost_subs(n)]
    ops.append([])
    return float(np.einsum(*ops, optimize=True))


def enumerate_deterministic_stage_policies(spec, n, cap=DEFAULT_POLICY_CAP):
    """All |U^n|^{|Y^n|} stage tables, lexicographic in the action-index tuple."""
    dm = spec.dms[n - 1]
    count = dm.u_space.size ** dm.y_space.size
    if count > cap:
        raise CapExceededError(
            f"DM {n}: {count} stage policies exceeds cap {cap}",
            required=count,
            cap=cap,
        )
    return itertools.product(range(dm.u_space.size), repeat=dm.y_space.size)


def count_deterministic_policies(spec):
    total = 1
    for dm in spec.dms:
        total *= dm.u_space.size ** dm.y_space.size
    return total


def _mixed_radix_decode(flat, sizes):
    out = []
    for s in reversed(sizes):
        out.append(flat % s)
        flat //= s
    return list(reversed(out))


def _mixed_radix_encode(digits, sizes):
    flat = 0
    for d, s in zip(digits, sizes):
        flat = flat * s + d
    return flat


def perfect_recall_expansion(spec, max_cells=DEFAULT_CELL_CAP):
    """Rewrite the team so DM n directly measures the full history.

    DM n's new measurement space is prod_{k<n}(Y^k x U^k) x Y^n with labels
    flattened into tuples ``(y^1, u^1, ..., u^{n-1}, y^n)``.  The new kernels
    copy the history coordinates deterministically and draw the Y^n coordinate
    from the original kernel; costs are unchanged, so any lifted policy keeps
    its expected cost.
    """
    n_dms = spec.n_dms
    if n_dms == 1:
        return spec

    orig_y = [dm.y_space.size for dm in spec.dms]
    orig_u = [dm.u_space.size for dm in spec.dms]

    new_spaces = [spec.dms[0].y_space]
    for n in range(2, n_dms + 1):
        parts = []
        for k in range(n - 1):
            parts.append(spec.dms[k].y_space.labels)
            parts.append(spec.dms[k].u_space.labels)
        parts.append(spec.dms[n - 1].y_space.labels)
        labels = []
        for combo in itertools.product(*parts):
            flat = []
            for c in combo:
                flat.append(c)
            labels.append(tuple(flat))
        new_spaces.append(FiniteSpace(labels))

    new_dms = []
    for n in range(1, n_dms + 1):
        dm = spec.dms[n - 1]
        if n == 1:
            new_dms.append(dm)
            continue
        in_spaces = (spec.omega0,)
        for k in range(1, n):
            in_spaces += (new_spaces[k - 1], spec.dms[k - 1].u_space)
        out_space = new_spaces[n - 1]
        in_sizes = [s.size for s in in_spaces]
        cells = int(np.prod(in_sizes, dtype=object)) * out_space.size
        if cells > max_cells:
            raise CapExceededError(
                f"perfect-recall expansion needs {cells} kernel cells for DM {n}",
                required=cells,
                cap=max_cells,
            )
        # Original history radix (y^1, u^1, ..., y^{n-1}, u^{n-1}); the
        # expanded output index is (history, y^n) in that mixed radix.
        hist_sizes = []
        for k in range(n - 1):
            hist_sizes += [orig_y[k], orig_u[k]]
        prev_sizes = hist_sizes[:-1]  # radix of Y'^{n-1} labels
        table = np.zeros(tuple(in_sizes) + (out_space.size,))
        orig_table = dm.kernel.table
        for idx in np.ndindex(*in_sizes):
            o = idx[0]
            u_last = idx[-1]
            yprev = idx[-2]
            digits = _mixed_radix_decode(yprev, prev_sizes) + [u_last]
            orig_idx = (o, *digits)
            row = orig_table[orig_idx]
            base = _mixed_radix_encode(digits, hist_sizes) * orig_y[n - 1]
            for y in range(orig_y[n - 1]):
                table[idx + (base + y,)] = row[y]
        new_dms.append(DecisionMaker(out_space, dm.u_space, Kernel(in_spaces, out_space, table)))

    return TeamSpec(spec.omega0, spec.prior, tuple(new_dms), spec.cost)


def lift_policy(spec, policy):
    """Lift a policy on the original team to its perfect-recall expansion.

    The lifted DM n ignores the copied history coordinates and applies the
    original table to the trailing y^n coordinate.
    """
    y_sizes = [dm.y_space.size for dm in spec.dms]
    if isinstance(policy, DeterministicPolicy):
        lifted = [policy.per_dm[0]]
        for n in range(2, spec.n_dms + 1):
            hist = 1
            for k in range(n - 1):
                hist *= y_sizes[k] * spec.dms[k].u_space.size
            table = []
            orig = policy.per_dm[n - 1]
            for yprime in range(hist * y_sizes[n - 1]):
                table.append(orig[yprime % y_sizes[n - 1]])
            lifted.append(tuple(table))
        return DeterministicPolicy(tuple(lifted))
    lifted = [policy.per_dm[0]]
    for n in range(2, spec.n_dms + 1):
        hist = 1
        for k in range(n - 1):
            hist *= y_sizes[k] * spec.dms[k].u_space.size
        rows = np.asarray(policy.per_dm[n - 1])
        lifted.append(np.tile(rows, (hist, 1)))
    return RandomizedPolicy(tuple(lifted))


def uniform_distribution(space):
    return Distribution(space, np.full(space.size, 1.0 / space.size))


def deterministic_kernel(input_spaces, output_space, out_index_fn):
    """Kernel putting mass 1 on out_index_fn(*input index tuple)."""
    in_sizes = tuple(s.size for s in input_spaces)
    table = np.zeros(in_sizes + (output_space.size,))
    for idx in np.ndindex(*in_sizes) if in_sizes else [()]:
        table[idx + (out_index_fn(*idx),)] = 1.0
    return Kernel(tuple(input_spaces), output_space, table)
