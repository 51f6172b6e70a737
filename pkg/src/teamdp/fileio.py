"""One JSON document format for teams, measures, reduced teams, POMDPs, and
policies, distinguished by a top-level ``kind`` field.

All tables are flat or row lists in canonical lexicographic order, first
listed space slowest.  Numbers are emitted with full round-trip precision, so
serialize(parse(file)) reproduces every table to the last digit.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .cases import PomdpSpec
from .errors import SpecFormatError
from .model import (
    CostTable,
    DecisionMaker,
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    RandomizedPolicy,
    TeamSpec,
)
from .reduction import ReducedStaticTeam
from .strategic import StrategicMeasure

KINDS = ("team", "measure", "reduced", "pomdp", "policy")


def _label_out(label):
    if isinstance(label, Fraction):
        return float(label)
    if isinstance(label, (bool, int, float, str)):
        return label
    return str(label)


def _space_out(space):
    return [_label_out(l) for l in space.labels]


def _space_in(labels, where):
    try:
        return FiniteSpace(tuple(labels))
    except Exception as exc:
        raise SpecFormatError(f"{where}: bad labels ({exc})") from exc


def _require(doc, key, where):
    if key not in doc:
        raise SpecFormatError(f"{where}: missing field '{key}'")
    return doc[key]


def serialize_team(spec):
    dms = []
    for dm in spec.dms:
        rows = dm.kernel.table.reshape(-1, dm.y_space.size)
        dms.append(
            {
                "y_labels": _space_out(dm.y_space),
                "u_labels": _space_out(dm.u_space),
                "kernel": rows.tolist(),
            }
        )
    return {
        "kind": "team",
        "omega0": {"labels": _space_out(spec.omega0), "dist": spec.prior.probs.tolist()},
        "dms": dms,
        "cost": np.asarray(spec.cost.value).reshape(-1).tolist(),
    }


def parse_team(doc):
    o = _require(doc, "omega0", "team")
    omega0 = _space_in(_require(o, "labels", "omega0"), "omega0")
    prior = Distribution(omega0, np.asarray(_require(o, "dist", "omega0"), dtype=float))
    dms = []
    history = [omega0]
    for i, d in enumerate(_require(doc, "dms", "team"), start=1):
        y_space = _space_in(_require(d, "y_labels", f"dm {i}"), f"dm {i}")
        u_space = _space_in(_require(d, "u_labels", f"dm {i}"), f"dm {i}")
        rows = np.asarray(_require(d, "kernel", f"dm {i}"), dtype=float)
        in_spaces = tuple(history)
        in_sizes = tuple(s.size for s in in_spaces)
        expected_rows = int(np.prod(in_sizes)) if in_sizes else 1
        if rows.ndim != 2 or rows.shape != (expected_rows, y_space.size):
            raise SpecFormatError(
                f"dm {i}: kernel must be {expected_rows} rows of {y_space.size}"
            )
        kernel = Kernel(in_spaces, y_space, rows.reshape(in_sizes + (y_space.size,)))
        dms.append(DecisionMaker(y_space, u_space, kernel))
        history += [y_space, u_space]
    shape = (omega0.size,) + tuple(dm.u_space.size for dm in dms)
    cost = np.asarray(_require(doc, "cost", "team"), dtype=float)
    if cost.size != int(np.prod(shape)):
        raise SpecFormatError(f"cost must have {int(np.prod(shape))} entries")
    return TeamSpec(omega0, prior, tuple(dms), CostTable(cost.reshape(shape)))


def serialize_measure(measure):
    return {
        "kind": "measure",
        "shape": list(measure.probs.shape),
        "probs": measure.probs.reshape(-1).tolist(),
    }


def parse_measure(doc):
    shape = tuple(int(s) for s in _require(doc, "shape", "measure"))
    probs = np.asarray(_require(doc, "probs", "measure"), dtype=float)
    if probs.size != int(np.prod(shape)):
        raise SpecFormatError("measure probs do not match shape")
    if len(shape) % 2 == 0:
        raise SpecFormatError("measure shape must have odd rank (omega0 + y/u pairs)")
    return StrategicMeasure(probs.reshape(shape))


def serialize_reduced(reduced):
    dms = []
    for y_space, u_space, ref in reduced.per_dm:
        dms.append(
            {
                "y_labels": _space_out(y_space),
                "u_labels": _space_out(u_space),
                "reference": ref.probs.tolist(),
            }
        )
    return {
        "kind": "reduced",
        "omega0": {
            "labels": _space_out(reduced.omega0),
            "dist": reduced.prior.probs.tolist(),
        },
        "dms": dms,
        "reduced_cost": reduced.reduced_cost.reshape(-1).tolist(),
    }


def parse_reduced(doc):
    o = _require(doc, "omega0", "reduced")
    omega0 = _space_in(_require(o, "labels", "omega0"), "omega0")
    prior = Distribution(omega0, np.asarray(_require(o, "dist", "omega0"), dtype=float))
    per_dm = []
    for i, d in enumerate(_require(doc, "dms", "reduced"), start=1):
        y_space = _space_in(_require(d, "y_labels", f"dm {i}"), f"dm {i}")
        u_space = _space_in(_require(d, "u_labels", f"dm {i}"), f"dm {i}")
        ref = Distribution(
            y_space, np.asarray(_require(d, "reference", f"dm {i}"), dtype=float)
        )
        per_dm.append((y_space, u_space, ref))
    shape = (omega0.size,) + tuple(t[0].size for t in per_dm) + tuple(
        t[1].size for t in per_dm
    )
    cost = np.asarray(_require(doc, "reduced_cost", "reduced"), dtype=float)
    if cost.size != int(np.prod(shape)):
        raise SpecFormatError(f"reduced_cost must have {int(np.prod(shape))} entries")
    return ReducedStaticTeam(omega0, prior, tuple(per_dm), cost.reshape(shape))


def serialize_pomdp(pomdp):
    n_s, n_a = pomdp.states.size, pomdp.actions.size
    return {
        "kind": "pomdp",
        "states": _space_out(pomdp.states),
        "observations": _space_out(pomdp.observations),
        "actions": _space_out(pomdp.actions),
        "initial": pomdp.initial.probs.tolist(),
        "transition": pomdp.transition.table.reshape(n_s * n_a, n_s).tolist(),
        "observation": pomdp.observation.table.reshape(n_s, -1).tolist(),
        "stage_cost": np.asarray(pomdp.stage_cost).tolist(),
        "horizon": pomdp.horizon,
    }


def parse_pomdp(doc):
    states = _space_in(_require(doc, "states", "pomdp"), "states")
    observations = _space_in(_require(doc, "observations", "pomdp"), "observations")
    actions = _space_in(_require(doc, "actions", "pomdp"), "actions")
    initial = Distribution(
        states, np.asarray(_require(doc, "initial", "pomdp"), dtype=float)
    )
    trans = np.asarray(_require(doc, "transition", "pomdp"), dtype=float)
    if trans.shape != (states.size * actions.size, states.size):
        raise SpecFormatError("transition must be (states*actions) rows of states")
    obs = np.asarray(_require(doc, "observation", "pomdp"), dtype=float)
    if obs.shape != (states.size, observations.size):
        raise SpecFormatError("observation must be states rows of observations")
    return PomdpSpec(
        states=states,
        observations=observations,
        actions=actions,
        initial=initial,
        transition=Kernel(
            (states, actions), states,
            trans.reshape(states.size, actions.size, states.size),
        ),
        observation=Kernel((states,), observations, obs),
        stage_cost=np.asarray(_require(doc, "stage_cost", "pomdp"), dtype=float),
        horizon=int(_require(doc, "horizon", "pomdp")),
    )


def serialize_policy(policy):
    if isinstance(policy, DeterministicPolicy):
        return {"kind": "policy", "tables": [list(t) for t in policy.per_dm]}
    return {"kind": "policy", "rows": [np.asarray(t).tolist() for t in policy.per_dm]}


def parse_policy(doc):
    if "tables" in doc:
        return DeterministicPolicy(
            tuple(tuple(int(u) for u in t) for t in doc["tables"])
        )
    if "rows" in doc:
        return RandomizedPolicy(
            tuple(np.asarray(t, dtype=float) for t in doc["rows"])
        )
    raise SpecFormatError("policy: needs 'tables' or 'rows'")


_SERIALIZERS = {
    TeamSpec: serialize_team,
    StrategicMeasure: serialize_measure,
    ReducedStaticTeam: serialize_reduced,
    PomdpSpec: serialize_pomdp,
    DeterministicPolicy: serialize_policy,
    RandomizedPolicy: serialize_policy,
}

_PARSERS = {
    "team": parse_team,
    "measure": parse_measure,
    "reduced": parse_reduced,
    "pomdp": parse_pomdp,
    "policy": parse_policy,
}


def serialize(obj):
    for cls, fn in _SERIALIZERS.items():
        if isinstance(obj, cls):
            return fn(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def parse(doc):
    if not isinstance(doc, dict):
        raise SpecFormatError("document must be a mapping")
    kind = doc.get("kind")
    if kind not in _PARSERS:
        raise SpecFormatError(f"unknown kind {kind!r}; expected one of {KINDS}")
    return _PARSERS[kind](doc)


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(exc.msg, lineno=exc.lineno, colno=exc.colno) from exc
    return parse(doc)


def save(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(serialize(obj), fh, indent=1)
        fh.write("\n")
