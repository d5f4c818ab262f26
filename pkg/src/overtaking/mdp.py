"""Finite MDPs with a reachability or safety objective.

An :class:`Mdp` is a plain container: it can hold malformed data, and
:func:`validate` reports every problem instead of raising.  Loading from JSON
renormalizes rows that are within :data:`ROW_TOL` of summing to one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping

import numpy as np

ROW_TOL = 1e-12
EPS = float(np.finfo(float).eps)


class Objective(str, Enum):
    REACH = "reach"
    SAFETY = "safety"


class MdpError(ValueError):
    """Raised for structurally unusable MDPs (e.g. normalization empties them)."""


class MdpFormatError(MdpError):
    """Raised when a JSON MDP document does not match the schema."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def _frozen(row) -> np.ndarray:
    arr = np.array(row, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mdp:
    """States, target, objective and kernel rows ``kernel[s][a]`` over ``states``."""

    states: tuple[str, ...]
    target: str
    kernel: Mapping[str, Mapping[str, np.ndarray]]
    objective: Objective = Objective.REACH

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "objective", Objective(self.objective))
        frozen = {
            s: {a: _frozen(row) for a, row in acts.items()}
            for s, acts in self.kernel.items()
        }
        object.__setattr__(self, "kernel", frozen)

    @classmethod
    def build(
        cls,
        states,
        target: str,
        transitions: Mapping[str, Mapping[str, Mapping[str, float]]],
        objective: Objective | str = Objective.REACH,
    ) -> "Mdp":
        """Build from sparse rows ``{state: {action: {next_state: prob}}}``."""
        states = tuple(states)
        index = {s: i for i, s in enumerate(states)}
        kernel = {}
        for s, acts in transitions.items():
            kernel[s] = {}
            for a, row in acts.items():
                dense = np.zeros(len(states))
                for z, p in row.items():
                    dense[index[z]] += p
                kernel[s][a] = dense
        return cls(states, target, kernel, Objective(objective))

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def target_index(self) -> int:
        return self.index[self.target]

    @cached_property
    def nontarget(self) -> tuple[str, ...]:
        return tuple(s for s in self.states if s != self.target)

    def actions(self, state: str) -> tuple[str, ...]:
        return tuple(self.kernel.get(state, {}))

    def row(self, state: str, action: str) -> np.ndarray:
        return self.kernel[state][action]

    def with_objective(self, objective: Objective | str) -> "Mdp":
        return replace(self, objective=Objective(objective))

    def to_dict(self) -> dict[str, Any]:
        kernel: dict[str, dict[str, dict[str, float]]] = {}
        for s in self.nontarget:
            kernel[s] = {}
            for a in self.actions(s):
                row = self.row(s, a)
                kernel[s][a] = {
                    z: float(row[i]) for i, z in enumerate(self.states) if row[i] != 0.0
                }
        return {
            "states": list(self.states),
            "target": self.target,
            "objective": self.objective.value,
            "kernel": kernel,
        }

    @classmethod
    def from_dict(cls, doc: Any) -> "Mdp":
        """Parse the JSON MDP document, renormalizing near-stochastic rows once."""
        if not isinstance(doc, dict):
            raise MdpFormatError("top level must be an object", "$")
        for key in ("states", "target", "objective", "kernel"):
            if key not in doc:
                raise MdpFormatError(f"missing key {key!r}", "$")
        states = doc["states"]
        if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
            raise MdpFormatError("must be an array of strings", "$.states")
        if len(set(states)) != len(states):
            raise MdpFormatError("duplicate state identifiers", "$.states")
        target = doc["target"]
        if target not in states:
            raise MdpFormatError(f"{target!r} is not a declared state", "$.target")
        try:
            objective = Objective(doc["objective"])
        except ValueError:
            raise MdpFormatError("must be 'reach' or 'safety'", "$.objective") from None
        kernel_doc = doc["kernel"]
        if not isinstance(kernel_doc, dict):
            raise MdpFormatError("must be an object", "$.kernel")
        if target in kernel_doc:
            raise MdpFormatError("target state must not have kernel entries", f"$.kernel.{target}")
        index = {s: i for i, s in enumerate(states)}
        kernel: dict[str, dict[str, np.ndarray]] = {}
        for s, acts in kernel_doc.items():
            loc = f"$.kernel.{s}"
            if s not in index:
                raise MdpFormatError("unknown state", loc)
            if not isinstance(acts, dict):
                raise MdpFormatError("must be an object of actions", loc)
            kernel[s] = {}
            for a, row in acts.items():
                if not isinstance(row, dict):
                    raise MdpFormatError("must be an object of probabilities", f"{loc}.{a}")
                dense = np.zeros(len(states))
                for z, p in row.items():
                    if z not in index:
                        raise MdpFormatError("unknown state", f"{loc}.{a}.{z}")
                    if isinstance(p, bool) or not isinstance(p, (int, float)):
                        raise MdpFormatError("probability must be a number", f"{loc}.{a}.{z}")
                    dense[index[z]] = float(p)
                total = dense.sum()
                # rows already stochastic up to summation rounding are kept as
                # written so that load and dump round-trip exactly
                drift = abs(total - 1.0)
                if total > 0 and 8 * len(states) * EPS < drift <= ROW_TOL:
                    dense = dense / total
                kernel[s][a] = dense
        return cls(tuple(states), target, kernel, objective)


def load_mdp(path: str | Path) -> Mdp:
    """Read an MDP JSON file; errors name the path and the JSON location."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MdpFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpFormatError(f"{path}: invalid JSON ({exc.msg})", f"line {exc.lineno} column {exc.colno}") from exc
    try:
        return Mdp.from_dict(doc)
    except MdpFormatError as exc:
        err = MdpFormatError(f"{path}: {exc.args[0]}")
        err.location = exc.location
        raise err from exc


def dump_mdp(mdp: Mdp) -> str:
    return json.dumps(mdp.to_dict(), indent=2)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[tuple[str, str], ...] = field(default_factory=tuple)
    determinism: bool = False
    positivity: bool = False


def validate(mdp: Mdp) -> ValidationReport:
    """Check the kernel invariants; never raises."""
    issues: list[tuple[str, str]] = []
    if len(set(mdp.states)) != len(mdp.states):
        issues.append(("states", "duplicate state identifiers"))
    if mdp.target not in mdp.states:
        issues.append(("target", f"{mdp.target!r} is not a declared state"))
        return ValidationReport(False, tuple(issues))
    t = mdp.target_index
    if mdp.kernel.get(mdp.target):
        issues.append((mdp.target, "target state must be absorbing (no actions)"))
    for s in mdp.kernel:
        if s not in mdp.index:
            issues.append((s, "kernel entry for an undeclared state"))
    if not mdp.nontarget:
        issues.append(("states", "no non-target states"))

    deterministic = True
    positive = True
    nontarget_mask = np.ones(mdp.n, dtype=bool)
    nontarget_mask[t] = False
    for s in mdp.nontarget:
        acts = mdp.kernel.get(s, {})
        if not acts:
            issues.append((s, "state has no actions"))
            continue
        for a, row in acts.items():
            loc = f"{s}/{a}"
            if row.shape != (mdp.n,):
                issues.append((loc, f"row has length {row.shape[0]}, expected {mdp.n}"))
                continue
            if not np.all(np.isfinite(row)):
                issues.append((loc, "non-finite probability"))
                continue
            if np.any(row < 0):
                issues.append((loc, "negative probability"))
            total = float(row.sum())
            if abs(total - 1.0) > ROW_TOL:
                issues.append((loc, f"row sums to {total!r}, not 1"))
            inner = row[nontarget_mask]
            if np.count_nonzero(inner > 0) > 1:
                deterministic = False
            if np.any(inner <= 0):
                positive = False
    return ValidationReport(not issues, tuple(issues), deterministic, positive)


def _forced_to_target(mdp: Mdp, row: np.ndarray) -> bool:
    return row[mdp.target_index] >= 1.0 - ROW_TOL


def _drop_states(mdp: Mdp, kernel: dict[str, dict[str, np.ndarray]], removed: set[str]) -> Mdp:
    keep = [i for i, s in enumerate(mdp.states) if s not in removed]
    gone = [i for i, s in enumerate(mdp.states) if s in removed]
    t = mdp.target_index
    new_kernel = {}
    for s, acts in kernel.items():
        if s in removed:
            continue
        new_kernel[s] = {}
        for a, row in acts.items():
            row = row.copy()
            row[t] += row[gone].sum()
            new_kernel[s][a] = row[keep]
    return Mdp(tuple(mdp.states[i] for i in keep), mdp.target, new_kernel, mdp.objective)


def normalize(mdp: Mdp) -> Mdp:
    """Remove probability-one jumps to the target, to a fixed point.

    Reach: a state with such an action is merged into the target.  Safety:
    such actions are deleted, and states left without actions are merged into
    the target.  Inbound mass of merged states is redirected to the target.
    """
    current = mdp
    while True:
        kernel = {s: dict(current.kernel.get(s, {})) for s in current.nontarget}
        removed: set[str] = set()
        changed = False
        for s in current.nontarget:
            forced = [a for a, row in kernel[s].items() if _forced_to_target(current, row)]
            if not forced:
                continue
            changed = True
            if current.objective is Objective.REACH:
                removed.add(s)
            else:
                for a in forced:
                    del kernel[s][a]
                if not kernel[s]:
                    removed.add(s)
        if not changed:
            return current
        if len(removed) == len(current.nontarget):
            raise MdpError("normalization removes every non-target state")
        current = _drop_states(current, kernel, removed)


def sample_generic(
    n_states: int,
    actions_per_state: int,
    seed: int,
    concentration: float = 1.0,
) -> Mdp:
    """Reach MDP whose rows are i.i.d. symmetric Dirichlet draws over all states.

    States are named ``"1"`` .. ``"n"`` with ``"n"`` the target; actions are
    ``"a1"`` .. ``"ak"``.  The output depends only on the arguments.
    """
    if n_states < 2:
        raise ValueError("n_states must be at least 2")
    if actions_per_state < 1:
        raise ValueError("actions_per_state must be at least 1")
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    rng = np.random.default_rng(seed)
    states = tuple(str(i) for i in range(1, n_states + 1))
    alpha = np.full(n_states, float(concentration))
    kernel = {}
    for s in states[:-1]:
        kernel[s] = {}
        for k in range(1, actions_per_state + 1):
            row = rng.dirichlet(alpha)
            kernel[s][f"a{k}"] = row / row.sum()
    return Mdp(states, states[-1], kernel, Objective.REACH)


def sample_deterministic(
    n_states: int,
    max_actions: int,
    seed: int,
    objective: Objective | str = Objective.REACH,
) -> Mdp:
    """Random deterministic MDP: each action splits between ``s*`` and one state.

    Every non-target state gets between 1 and ``max_actions`` actions.  The
    non-target successor is uniform, and its probability is uniform on
    ``(0.05, 0.95)``, so the output is already normalized.
    """
    if n_states < 2:
        raise ValueError("n_states must be at least 2")
    rng = np.random.default_rng(seed)
    states = tuple(str(i) for i in range(1, n_states + 1))
    kernel = {}
    for s in states[:-1]:
        kernel[s] = {}
        for k in range(1, int(rng.integers(1, max_actions + 1)) + 1):
            row = np.zeros(n_states)
            z = int(rng.integers(0, n_states - 1))
            stay = float(rng.uniform(0.05, 0.95))
            row[z] = stay
            row[-1] = 1.0 - stay
            kernel[s][f"a{k}"] = row
    return Mdp(states, states[-1], kernel, Objective(objective))
