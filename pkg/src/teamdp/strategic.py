"""Strategic measures and decidable membership tests.

A strategic measure is the joint law on Omega0 x prod_k (Y^k x U^k) induced by
a team policy.  In finite spaces the membership characterizations become
pointwise checks on conditional probabilities, evaluated only on supported
events (conditioning mass above a small threshold); unsupported events
contribute no gap, mirroring the almost-sure qualifiers of the continuous
statements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .model import policy_matrices

SUPPORT_TOL = 1e-12
MAX_WITNESSES = 20


@dataclass(frozen=True)
class StrategicMeasure:
    """Probability tensor over (omega0, y^1, u^1, ..., y^N, u^N), interleaved."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n_dms(self):
        return (self.probs.ndim - 1) // 2


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    kernel_gap: float
    ci_gap: float
    prior_gap: float
    determinism_gap: float = 0.0
    witnesses: tuple = field(default_factory=tuple)


def _check_shape(measure, spec):
    expected = (spec.omega0.size,)
    for dm in spec.dms:
        expected += (dm.y_space.size, dm.u_space.size)
    if measure.probs.shape != expected:
        raise ShapeMismatchError(
            f"measure shape {measure.probs.shape} != {expected}"
        )


def induce_measure(spec, policy):
    """P(omega0, y, u) = prior * prod_n p_n(y^n|h) * prod_n pi^n(u^n|y^n)."""
    n = spec.n_dms
    mats = policy_matrices(spec, policy)
    ops = [spec.prior.probs, [0]]
    for i in range(1, n + 1):
        subs = [0]
        for k in range(1, i):
            subs += [k, n + k]
        subs.append(i)
        ops += [spec.dms[i - 1].kernel.table, subs]
        ops += [mats[i - 1], [i, n + i]]
    out = [0]
    for i in range(1, n + 1):
        out += [i, n + i]
    ops.append(out)
    return StrategicMeasure(np.einsum(*ops, optimize=True))


def measure_expected_cost(measure, cost):
    """Integral of the cost against the measure: sum P(omega0,y,u) c(omega0,u)."""
    n = measure.n_dms
    value = np.asarray(cost.value if hasattr(cost, "value") else cost)
    if value.ndim != n + 1:
        raise ShapeMismatchError("cost table arity does not match measure")
    subs = [0]
    for i in range(1, n + 1):
        subs += [i, n + i]
    return float(np.einsum(measure.probs, subs, value, [0] + [n + i for i in range(1, n + 1)], []))


def _conditional(num, den):
    """num/den with rows of unsupported den masked to nan."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return out


def validate_lr(measure, spec, tol=1e-9):
    """Membership test for measures induced by individually randomized policies.

    Checks, for every DM n on supported cells only:
      * the conditional law of y^n given the history equals the kernel p_n;
      * u^n is conditionally independent of the history given y^n;
    plus agreement of the omega0-marginal with the prior.
    """
    _check_shape(measure, spec)
    n = spec.n_dms
    p = measure.probs
    witnesses = []
    kernel_gap = 0.0
    ci_gap = 0.0

    marg0 = p.reshape(p.shape[0], -1).sum(axis=1)
    prior_gap = float(np.max(np.abs(marg0 - spec.prior.probs))) if p.size else 0.0
    if prior_gap > tol:
        witnesses.append(("prior", 0, (int(np.argmax(np.abs(marg0 - spec.prior.probs))),)))

    for i in range(1, n + 1):
        y_axis = 2 * i - 1
        # P(h_{i-1}, y^i) and P(h_{i-1})
        hy = p.sum(axis=tuple(range(y_axis + 1, p.ndim)))
        h = hy.sum(axis=-1)
        supported_h = h > SUPPORT_TOL
        cond_y = _conditional(hy, h[..., None])
        diff = np.abs(cond_y - spec.dms[i - 1].kernel.table)
        diff = np.where(supported_h[..., None], diff, 0.0)
        g = float(diff.max()) if diff.size else 0.0
        if g > kernel_gap:
            kernel_gap = g
        for idx in np.argwhere(diff > tol)[:MAX_WITNESSES]:
            witnesses.append(("kernel", i, tuple(int(j) for j in idx)))

        # P(u^i | h_{i-1}, y^i) vs P(u^i | y^i)
        hyu = p.sum(axis=tuple(range(y_axis + 2, p.ndim)))
        supported_hy = hy > SUPPORT_TOL
        cond_u_full = _conditional(hyu, hy[..., None])
        yu = p.sum(axis=tuple(a for a in range(p.ndim) if a not in (y_axis, y_axis + 1)))
        cond_u_marg = _conditional(yu, yu.sum(axis=-1, keepdims=True))
        diff = np.abs(cond_u_full - cond_u_marg)
        diff = np.where(supported_hy[..., None], diff, 0.0)
        g = float(diff.max()) if diff.size else 0.0
        if g > ci_gap:
            ci_gap = g
        for idx in np.argwhere(diff > tol)[:MAX_WITNESSES]:
            witnesses.append(("ci", i, tuple(int(j) for j in idx)))

    passed = kernel_gap <= tol and ci_gap <= tol and prior_gap <= tol
    return MembershipReport(
        passed=passed,
        kernel_gap=kernel_gap,
        ci_gap=ci_gap,
        prior_gap=prior_gap,
        witnesses=tuple(witnesses[:MAX_WITNESSES]),
    )


def validate_la(measure, spec, tol=1e-9):
    """validate_lr plus degeneracy of every supported conditional P(u^n|y^n)."""
    base = validate_lr(measure, spec, tol)
    n = spec.n_dms
    p = measure.probs
    determinism_gap = 0.0
    witnesses = list(base.witnesses)
    for i in range(1, n + 1):
        y_axis = 2 * i - 1
        yu = p.sum(axis=tuple(a for a in range(p.ndim) if a not in (y_axis, y_axis + 1)))
        y_mass = yu.sum(axis=-1)
        rows = _conditional(yu, y_mass[:, None])
        off_modal = np.where(y_mass > SUPPORT_TOL, 1.0 - rows.max(axis=-1), 0.0)
        g = float(off_modal.max()) if off_modal.size else 0.0
        if g > determinism_gap:
            determinism_gap = g
        for y in np.nonzero(off_modal > tol)[0][:MAX_WITNESSES]:
            witnesses.append(("determinism", i, (int(y),)))
    passed = base.passed and determinism_gap <= tol
    return MembershipReport(
        passed=passed,
        kernel_gap=base.kernel_gap,
        ci_gap=base.ci_gap,
        prior_gap=base.prior_gap,
        determinism_gap=determinism_gap,
        witnesses=tuple(witnesses[:MAX_WITNESSES]),
    )
