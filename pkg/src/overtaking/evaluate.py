"""Reach curves, exact absorption quantities and the overtaking comparison.

Curves follow the period convention of the worked examples: the initial
state is period 1, so ``v_1 = 0`` and ``v_t`` is the probability of having
entered the target after ``t - 1`` transitions.  Each curve also keeps the
log of its survival ``1 - v_t`` computed directly from the non-target mass,
so tails far below machine epsilon still compare correctly.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse import csr_matrix

from .mdp import Mdp, Objective
from .strategy import (
    MarkovPlan,
    StationaryStrategy,
    induced_matrix,
    iter_plan_matrices,
)

HITTING_ONE_TOL = 1e-9


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReachCurve:
    """``values[t-1] = P(t* <= t)`` for ``t = 1..horizon``."""

    initial: str
    log_survival: np.ndarray

    def __post_init__(self):
        ls = np.array(self.log_survival, dtype=float)
        ls.setflags(write=False)
        object.__setattr__(self, "log_survival", ls)

    @classmethod
    def from_values(cls, initial: str, values: Sequence[float]) -> "ReachCurve":
        v = np.asarray(values, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(initial, np.log1p(-v))

    @property
    def horizon(self) -> int:
        return len(self.log_survival)

    @property
    def survival(self) -> np.ndarray:
        return np.exp(self.log_survival)

    @property
    def values(self) -> np.ndarray:
        return 0.0 - np.expm1(self.log_survival)

    def at(self, t: int) -> float:
        return float(self.values[t - 1])


def _propagate(matrices: Iterable[np.ndarray], x0: np.ndarray, horizon: int) -> np.ndarray:
    """Log survival after 0..horizon-1 transitions; rows of ``x0`` are start distributions.

    ``matrices`` yields the reduced matrix for periods 1, 2, ...; each may be a
    single ``(m, m)`` array or a stack matching the leading axes of ``x0``.
    """
    x = np.array(x0, dtype=float)
    out = np.zeros(x.shape[:-1] + (horizon,))
    scale = np.log(x.sum(axis=-1))
    out[..., 0] = scale
    for t, m in zip(range(1, horizon), matrices):
        x = x @ m
        mass = x.sum(axis=-1)
        live = mass > 0
        with np.errstate(divide="ignore"):
            scale = scale + np.log(mass)
        x = np.where(live[..., None], x / np.where(live, mass, 1.0)[..., None], 0.0)
        out[..., t] = scale
    return out


def log_survival_table(reduced: np.ndarray, horizon: int) -> np.ndarray:
    """Log survival from every start state, for one or a stack of reduced matrices.

    ``reduced`` has shape ``(m, m)`` or ``(K, m, m)``; the result has shape
    ``(..., m, horizon)`` with row ``i`` started at state ``i``.
    """
    reduced = np.asarray(reduced, dtype=float)
    m = reduced.shape[-1]
    x0 = np.broadcast_to(np.eye(m), reduced.shape).copy()
    return _propagate(_repeat(reduced), x0, horizon)


def _repeat(m):
    while True:
        yield m


def _check_initial(mdp: Mdp, s0: str) -> int:
    if s0 == mdp.target:
        raise EvaluationError("initial state must not be the target")
    if s0 not in mdp.index:
        raise EvaluationError(f"unknown state {s0!r}")
    return mdp.nontarget.index(s0)


def reach_curve(
    mdp: Mdp,
    strategy: StationaryStrategy | MarkovPlan,
    s0: str,
    T_max: int,
) -> ReachCurve:
    """Forward propagation of the state distribution from ``s0``."""
    i = _check_initial(mdp, s0)
    if T_max < 1:
        raise EvaluationError("T_max must be at least 1")
    x0 = np.zeros(len(mdp.nontarget))
    x0[i] = 1.0
    ls = _propagate(iter_plan_matrices(mdp, strategy), x0, T_max)
    return ReachCurve(s0, ls)


def reach_curves(mdp: Mdp, sigma: StationaryStrategy, T_max: int) -> dict[str, ReachCurve]:
    """Curves of a stationary strategy from every non-target state."""
    m = next(iter_plan_matrices(mdp, sigma))
    table = log_survival_table(m, T_max)
    return {s: ReachCurve(s, table[i]) for i, s in enumerate(mdp.nontarget)}


def _absorption_parts(mdp: Mdp, sigma: StationaryStrategy) -> tuple[np.ndarray, np.ndarray]:
    full = induced_matrix(mdp, sigma).matrix
    keep = [mdp.index[s] for s in mdp.nontarget]
    return full[np.ix_(keep, keep)], full[keep, mdp.target_index]


def _reachable(adjacency: np.ndarray, sources) -> np.ndarray:
    graph = csr_matrix(adjacency > 0)
    seen = np.zeros(adjacency.shape[0], dtype=bool)
    for s in sources:
        if not seen[s]:
            seen[breadth_first_order(graph, s, directed=True, return_predecessors=False)] = True
    return seen


def hitting_probabilities(mdp: Mdp, sigma: StationaryStrategy) -> np.ndarray:
    """Minimal nonnegative solution of ``x = A'x + b`` on the non-target states.

    States with no path to the target get 0; on the rest ``I - A'`` is
    nonsingular, so a direct solve gives the minimal solution.
    """
    a, b = _absorption_parts(mdp, sigma)
    live = _reachable(a.T, np.flatnonzero(b > 0))
    x = np.zeros(len(b))
    if live.any():
        idx = np.flatnonzero(live)
        x[idx] = np.linalg.solve(np.eye(len(idx)) - a[np.ix_(idx, idx)], b[idx])
    return np.clip(x, 0.0, 1.0)


def hitting_probability(mdp: Mdp, sigma: StationaryStrategy, s0: str) -> float:
    i = _check_initial(mdp, s0)
    return float(hitting_probabilities(mdp, sigma)[i])


def expected_hitting_time(mdp: Mdp, sigma: StationaryStrategy, s0: str) -> float:
    """Expected number of transitions until the target; ``inf`` if it may never come."""
    i = _check_initial(mdp, s0)
    if hitting_probabilities(mdp, sigma)[i] < 1.0 - HITTING_ONE_TOL:
        return math.inf
    a, _ = _absorption_parts(mdp, sigma)
    idx = np.flatnonzero(_reachable(a, [i]))
    h = np.linalg.solve(np.eye(len(idx)) - a[np.ix_(idx, idx)], np.ones(len(idx)))
    return float(h[list(idx).index(i)])


def discounted_value(mdp: Mdp, sigma: StationaryStrategy, beta: float, s0: str) -> float:
    """Normalized discounted payoff with payoff 1 in the target and 0 elsewhere.

    Equal to ``E[beta ** (number of transitions before the target)]``.
    """
    if not 0.0 < beta < 1.0:
        raise EvaluationError("beta must lie in (0, 1)")
    i = _check_initial(mdp, s0)
    a, b = _absorption_parts(mdp, sigma)
    d = np.linalg.solve(np.eye(len(b)) - beta * a, beta * b)
    return float(d[i])


def avg_prefix_payoffs(avg, s0: str, path: Sequence[str], T: int) -> np.ndarray:
    """Running averages ``(1/t) sum_{k<=t} u'(s_k, a_k)`` along a deterministic path."""
    if len(path) < T:
        raise EvaluationError(f"path has {len(path)} actions, {T} needed")
    state = s0
    total = 0.0
    out = np.empty(T)
    for t, a in enumerate(path[:T], start=1):
        if (state, a) not in avg.successor:
            raise EvaluationError(f"step {t}: action {a!r} is not available at state {state!r}")
        total += avg.payoff[(state, a)]
        out[t - 1] = total / t
        state = avg.successor[(state, a)]
    return out


class VerdictKind(str, Enum):
    OVERTAKES = "Overtakes"
    OVERTAKEN = "Overtaken"
    WEAKLY_OVERTAKES = "WeaklyOvertakes"
    WEAKLY_OVERTAKEN = "WeaklyOvertaken"
    EQUAL_ON_WINDOW = "EqualOnWindow"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class Verdict:
    """Finite-window classification; a surrogate for the tail definitions."""

    kind: VerdictKind
    window: tuple[int, int]
    better: tuple[int, ...] = ()
    worse: tuple[int, ...] = ()
    eq_tol: float = 1e-10
    weak_count: int = 1
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "verdict": self.kind.value,
            "window": list(self.window),
            "better_periods": period_ranges(self.better),
            "worse_periods": period_ranges(self.worse),
            "eq_tol": self.eq_tol,
            "weak_count": self.weak_count,
        }


def period_ranges(periods: Sequence[int]) -> list[list[int]]:
    """Collapse sorted periods into inclusive ``[start, end]`` runs."""
    runs: list[list[int]] = []
    for t in periods:
        if runs and t == runs[-1][1] + 1:
            runs[-1][1] = t
        else:
            runs.append([t, t])
    return runs


def advantage(
    curve_a: ReachCurve,
    curve_b: ReachCurve,
    objective: Objective | str,
    t0: int,
    t1: int,
) -> np.ndarray:
    """Signed advantage of A over B on periods ``t0..t1``, relative to the tail mass.

    For Reach this is ``(s_B - s_A) / max(s_A, s_B)`` with ``s = 1 - v``; the
    sign is flipped for Safety.  Values lie in ``[-1, 1]``.
    """
    la = curve_a.log_survival[t0 - 1 : t1]
    lb = curve_b.log_survival[t0 - 1 : t1]
    hi = np.maximum(la, lb)
    with np.errstate(invalid="ignore"):
        rel = np.exp(lb - hi) - np.exp(la - hi)
    rel = np.where(np.isneginf(hi), 0.0, rel)
    if Objective(objective) is Objective.SAFETY:
        rel = -rel
    return rel


def compare(
    curve_a: ReachCurve,
    curve_b: ReachCurve,
    window: tuple[int, int],
    objective: Objective | str = Objective.REACH,
    eq_tol: float = 1e-10,
    weak_fraction: float = 0.1,
) -> Verdict:
    """Classify A against B on ``window`` (inclusive).

    ``eq_tol`` is relative to the larger survival mass.  Weak overtaking asks
    for no period worse than ``-eq_tol`` and at least
    ``ceil(weak_fraction * (T1 - T0))`` (minimum 1) strictly better periods.
    """
    if curve_a.initial != curve_b.initial:
        raise EvaluationError(
            f"curves start from different states ({curve_a.initial!r}, {curve_b.initial!r})"
        )
    t0, t1 = window
    if t0 < 1 or t1 < t0:
        raise EvaluationError(f"invalid window {window}")
    if t1 > min(curve_a.horizon, curve_b.horizon):
        raise EvaluationError("window extends past a curve's horizon")
    d = advantage(curve_a, curve_b, objective, t0, t1)
    periods = np.arange(t0, t1 + 1)
    better = tuple(int(t) for t in periods[d > eq_tol])
    worse = tuple(int(t) for t in periods[d < -eq_tol])
    need = max(1, math.ceil(weak_fraction * (t1 - t0)))
    n = len(periods)
    if len(better) == n:
        kind = VerdictKind.OVERTAKES
    elif len(worse) == n:
        kind = VerdictKind.OVERTAKEN
    elif not better and not worse:
        kind = VerdictKind.EQUAL_ON_WINDOW
    elif not worse and len(better) >= need:
        kind = VerdictKind.WEAKLY_OVERTAKES
    elif not better and len(worse) >= need:
        kind = VerdictKind.WEAKLY_OVERTAKEN
    else:
        kind = VerdictKind.INCOMPARABLE
    return Verdict(kind, (t0, t1), better, worse, eq_tol, need)


def curve_to_csv(curve: ReachCurve) -> str:
    out = io.StringIO()
    out.write("t,prob\n")
    for t, v in enumerate(curve.values, start=1):
        out.write(f"{t},{v:.17g}\n")
    return out.getvalue()


def curve_from_csv(text: str, initial: str) -> ReachCurve:
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != "t,prob":
        raise EvaluationError("curve CSV must start with the header 't,prob'")
    values = []
    for k, line in enumerate(lines[1:], start=1):
        t, v = line.split(",")
        if int(t) != k:
            raise EvaluationError(f"line {k + 1}: expected period {k}, got {t}")
        values.append(float(v))
    return ReachCurve.from_values(initial, values)


__all__ = [
    "ReachCurve",
    "Verdict",
    "VerdictKind",
    "advantage",
    "avg_prefix_payoffs",
    "compare",
    "curve_from_csv",
    "curve_to_csv",
    "discounted_value",
    "expected_hitting_time",
    "hitting_probabilities",
    "hitting_probability",
    "log_survival_table",
    "period_ranges",
    "reach_curve",
    "reach_curves",
]
