"""Stationary strategies, time-dependent Markov plans and induced matrices."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

import numpy as np

from .mdp import Mdp

PROB_TOL = 1e-12
ENUMERATION_CAP = 10**6


class StrategyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StationaryStrategy:
    """Mixed action per state, as ``{state: {action: probability}}``.

    Zero-probability actions are dropped on construction, so two strategies
    with the same support and weights compare equal.
    """

    probs: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        clean: dict[str, dict[str, float]] = {}
        for s, dist in self.probs.items():
            if not dist:
                raise StrategyError(f"state {s!r}: empty mixed action")
            total = 0.0
            for a, p in dist.items():
                if not math.isfinite(p) or p < 0:
                    raise StrategyError(f"state {s!r}: invalid probability {p!r} for {a!r}")
                total += p
            if abs(total - 1.0) > PROB_TOL:
                raise StrategyError(f"state {s!r}: probabilities sum to {total!r}")
            clean[s] = {a: float(p) for a, p in dist.items() if p > 0}
        object.__setattr__(self, "probs", clean)

    @classmethod
    def pure(cls, choice: Mapping[str, str]) -> "StationaryStrategy":
        return cls({s: {a: 1.0} for s, a in choice.items()})

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(self.probs)

    @property
    def is_pure(self) -> bool:
        return all(len(d) == 1 for d in self.probs.values())

    def dist(self, state: str) -> Mapping[str, float]:
        try:
            return self.probs[state]
        except KeyError:
            raise StrategyError(f"strategy has no mixed action for state {state!r}") from None

    def action(self, state: str) -> str:
        """The action played at ``state``; only for pure strategies."""
        d = self.dist(state)
        if len(d) != 1:
            raise StrategyError(f"strategy is mixed at {state!r}")
        return next(iter(d))

    def profile(self) -> str:
        """Compact label, ``x:a;y:c`` for pure and ``x:a=0.5|b=0.5`` for mixed."""
        parts = []
        for s, d in self.probs.items():
            if len(d) == 1:
                parts.append(f"{s}:{next(iter(d))}")
            else:
                parts.append(f"{s}:" + "|".join(f"{a}={p:.17g}" for a, p in d.items()))
        return ";".join(parts)

    def with_state(self, state: str, dist: Mapping[str, float]) -> "StationaryStrategy":
        probs = {s: dict(d) for s, d in self.probs.items()}
        probs[state] = dict(dist)
        return StationaryStrategy(probs)

    def __eq__(self, other):
        if not isinstance(other, StationaryStrategy):
            return NotImplemented
        return self.probs == other.probs

    def __hash__(self):
        return hash(tuple(sorted((s, tuple(sorted(d.items()))) for s, d in self.probs.items())))

    def to_json(self) -> dict[str, Any]:
        return {s: (next(iter(d)) if len(d) == 1 else dict(d)) for s, d in self.probs.items()}

    @classmethod
    def from_json(cls, doc: Any) -> "StationaryStrategy":
        if not isinstance(doc, dict):
            raise StrategyError("strategy must be an object state -> action")
        probs = {}
        for s, v in doc.items():
            if isinstance(v, str):
                probs[s] = {v: 1.0}
            elif isinstance(v, dict):
                probs[s] = {a: float(p) for a, p in v.items()}
            else:
                raise StrategyError(f"state {s!r}: expected an action name or an object")
        return cls(probs)


@dataclass(frozen=True, eq=False)
class MarkovPlan:
    """Explicit per-period strategies for periods ``1..horizon`` then a stationary tail."""

    rows: tuple[StationaryStrategy, ...]
    tail: StationaryStrategy

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def horizon(self) -> int:
        return len(self.rows)

    def at(self, period: int) -> StationaryStrategy:
        if period < 1:
            raise ValueError("periods start at 1")
        return self.rows[period - 1] if period <= len(self.rows) else self.tail

    def to_json(self) -> dict[str, Any]:
        return {"rows": [r.to_json() for r in self.rows], "tail": self.tail.to_json()}

    @classmethod
    def from_json(cls, doc: Any) -> "MarkovPlan":
        if not isinstance(doc, dict) or "rows" not in doc or "tail" not in doc:
            raise StrategyError("plan must be an object with 'rows' and 'tail'")
        return cls(
            tuple(StationaryStrategy.from_json(r) for r in doc["rows"]),
            StationaryStrategy.from_json(doc["tail"]),
        )


def load_strategy(text: str) -> StationaryStrategy | MarkovPlan:
    doc = json.loads(text)
    if isinstance(doc, dict) and set(doc) == {"rows", "tail"}:
        return MarkovPlan.from_json(doc)
    return StationaryStrategy.from_json(doc)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic matrix over ``states`` with an absorbing target row."""

    matrix: np.ndarray
    states: tuple[str, ...]
    target: str

    @property
    def target_index(self) -> int:
        return self.states.index(self.target)

    @property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}


def enumerate_pure_stationary(mdp: Mdp, cap: int = ENUMERATION_CAP) -> list[StationaryStrategy]:
    """All pure stationary strategies, lexicographic in declaration order."""
    choices = [mdp.actions(s) for s in mdp.nontarget]
    count = math.prod(len(c) for c in choices)
    if count > cap:
        raise StrategyError(f"{count} pure stationary strategies exceed the cap of {cap}")
    return [
        StationaryStrategy.pure(dict(zip(mdp.nontarget, combo)))
        for combo in itertools.product(*choices)
    ]


def _state_row(mdp: Mdp, sigma: StationaryStrategy, s: str) -> np.ndarray:
    row = np.zeros(mdp.n)
    available = mdp.kernel.get(s, {})
    for a, p in sigma.dist(s).items():
        if a not in available:
            raise StrategyError(f"action {a!r} is not available at state {s!r}")
        row += p * available[a]
    return row


def induced_matrix(mdp: Mdp, sigma: StationaryStrategy) -> TransitionMatrix:
    """``M[s, z] = sum_a sigma(a|s) p(z|s,a)``; the target row is a self-loop.

    States of ``sigma`` that the MDP does not have are ignored.
    """
    m = np.zeros((mdp.n, mdp.n))
    for s in mdp.nontarget:
        m[mdp.index[s]] = _state_row(mdp, sigma, s)
    m[mdp.target_index, mdp.target_index] = 1.0
    m.setflags(write=False)
    return TransitionMatrix(m, mdp.states, mdp.target)


def reduced_array(mdp: Mdp, sigma: StationaryStrategy) -> np.ndarray:
    """The induced matrix without the target row and column."""
    keep = [mdp.index[s] for s in mdp.nontarget]
    return induced_matrix(mdp, sigma).matrix[np.ix_(keep, keep)]


def stationary_from_first_actions(
    per_state: Mapping[str, Mapping[str, float] | str],
    states=None,
) -> StationaryStrategy:
    """Stationary strategy using the given first-period mixed action at each state.

    ``states`` (e.g. ``mdp.nontarget``) lists the states that must be covered.
    """
    if states is not None:
        missing = [s for s in states if s not in per_state]
        if missing:
            raise StrategyError(f"no mixed action given for state {missing[0]!r}")
    probs = {
        s: ({d: 1.0} if isinstance(d, str) else dict(d)) for s, d in per_state.items()
    }
    return StationaryStrategy(probs)


def random_stationary(mdp: Mdp, rng: np.random.Generator) -> StationaryStrategy:
    """Mixed stationary strategy with uniform-on-simplex weights at every state."""
    probs = {}
    for s in mdp.nontarget:
        acts = mdp.actions(s)
        w = rng.dirichlet(np.ones(len(acts)))
        w = w / w.sum()
        probs[s] = dict(zip(acts, w.tolist()))
    return StationaryStrategy(probs)


def iter_plan_matrices(mdp: Mdp, plan: StationaryStrategy | MarkovPlan) -> Iterator[np.ndarray]:
    """Reduced matrices for periods 1, 2, ... (infinite iterator)."""
    if isinstance(plan, StationaryStrategy):
        m = reduced_array(mdp, plan)
        while True:
            yield m
    cache: dict[int, np.ndarray] = {}
    period = 1
    while True:
        strat = plan.at(period)
        key = id(strat)
        if key not in cache:
            cache[key] = reduced_array(mdp, strat)
        yield cache[key]
        period += 1
