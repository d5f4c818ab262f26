"""The worked examples and finite checks of the claims made about them.

Models
------
Example 1
    Four states ``x, y, z, s*``.  At ``x``, action ``a`` jumps to ``s*`` with
    probability ``q`` (else to ``y``) and ``b`` with probability 1/2 (else to
    ``z``); ``y`` repeats ``q`` and ``z`` repeats ``p``.  Action ``a`` wins
    eventually while ``b`` wins the discounted and expected-time criteria.
Example 2
    ``x`` loops with ``a`` (half to ``s*``) or moves to ``y`` with ``b``
    (3/4 to ``s*``); ``y`` moves on to ``z`` for free and ``z`` loops at 1/2.
    Every pure plan has the same curve in the long run, and randomizing does
    better.
Example 3
    Example 2 with the choice between ``a`` and ``b`` made by a lottery
    inside a single action ``c``, so that randomization becomes a pure plan.
Incomparable pair
    One state with actions ``a_0, a_1/2, a_7/8``; always ``a_1/2`` against
    the cycle ``a_0, a_7/8, a_0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evaluate import (
    VerdictKind,
    advantage,
    compare,
    discounted_value,
    expected_hitting_time,
    reach_curve,
)
from .horizon import empirical_crossover
from .mdp import Mdp, Objective
from .strategy import MarkovPlan, StationaryStrategy

TARGET = "s*"
CURVE_TOL = 1e-12


class RegimeWarning(UserWarning):
    """Example 1 parameters outside ``0 < p < q < 2p / (2p + 1)``."""


class PlanError(ValueError):
    pass


def example1_regime(p: float, q: float) -> bool:
    return 0 < p < q < 2 * p / (2 * p + 1)


def build_example1(p: float = 0.1, q: float = 0.11) -> Mdp:
    if not (0 < p < 1 and 0 < q < 1):
        raise ValueError(f"p and q must lie in (0, 1), got p={p!r}, q={q!r}")
    if not example1_regime(p, q):
        warnings.warn(
            f"(p, q) = ({p}, {q}) is outside 0 < p < q < 2p/(2p+1); the claims may not hold",
            RegimeWarning,
            stacklevel=2,
        )
    return Mdp.build(
        ("x", "y", "z", TARGET),
        TARGET,
        {
            "x": {"a": {TARGET: q, "y": 1 - q}, "b": {TARGET: 0.5, "z": 0.5}},
            "y": {"c": {TARGET: q, "y": 1 - q}},
            "z": {"d": {TARGET: p, "z": 1 - p}},
        },
    )


def build_example2() -> Mdp:
    return Mdp.build(
        ("x", "y", "z", TARGET),
        TARGET,
        {
            "x": {"a": {TARGET: 0.5, "x": 0.5}, "b": {TARGET: 0.75, "y": 0.25}},
            "y": {"d": {"z": 1.0}},
            "z": {"e": {TARGET: 0.5, "z": 0.5}},
        },
    )


def build_example2_safety() -> Mdp:
    """Safety counterpart: ``b`` never hits the target and ``d`` does with probability 3/4."""
    return Mdp.build(
        ("x", "y", "z", TARGET),
        TARGET,
        {
            "x": {"a": {TARGET: 0.5, "x": 0.5}, "b": {"y": 1.0}},
            "y": {"d": {TARGET: 0.75, "z": 0.25}},
            "z": {"e": {TARGET: 0.5, "z": 0.5}},
        },
        Objective.SAFETY,
    )


def _lottery(objective: Objective) -> dict[str, float]:
    # half the time c behaves like b of the matching Example 2 variant,
    # half the time like a but landing in x' instead of x
    if objective is Objective.REACH:
        return {TARGET: 0.625, "y": 0.125, "x'": 0.25}
    return {TARGET: 0.25, "y": 0.5, "x'": 0.25}


def build_example3(objective: Objective | str = Objective.REACH) -> Mdp:
    """Example 3 with the composite action ``c`` flattened to its one-step distribution.

    ``objective="safety"`` builds the same construction on top of the safety
    counterpart of Example 2.
    """
    objective = Objective(objective)
    base = build_example2() if objective is Objective.REACH else build_example2_safety()
    c = _lottery(objective)
    return Mdp.build(
        ("x", "x'", "y", "z", TARGET),
        TARGET,
        {
            "x": {"a": {TARGET: 0.5, "x": 0.5}, "c": c},
            "x'": {"c'": c},
            "y": {"d": _sparse(base, "y", "d")},
            "z": {"e": {TARGET: 0.5, "z": 0.5}},
        },
        objective,
    )


def _sparse(mdp: Mdp, s: str, a: str) -> dict[str, float]:
    row = mdp.row(s, a)
    return {z: float(row[i]) for i, z in enumerate(mdp.states) if row[i] > 0}


INCOMPARABLE_ACTIONS = {"a0": 0.0, "a1/2": 0.5, "a7/8": 0.875}


def build_incomparable() -> Mdp:
    return Mdp.build(
        ("x", TARGET),
        TARGET,
        {"x": {a: {TARGET: z, "x": 1 - z} for a, z in INCOMPARABLE_ACTIONS.items()}},
    )


def incomparable_pair(horizon: int) -> tuple[StationaryStrategy, MarkovPlan]:
    """``a_1/2`` forever, and the cycle ``a_0, a_7/8, a_0`` written out to ``horizon`` periods."""
    cycle = ("a0", "a7/8", "a0")
    rows = tuple(StationaryStrategy.pure({"x": cycle[k % 3]}) for k in range(horizon))
    return StationaryStrategy.pure({"x": "a1/2"}), MarkovPlan(rows, rows[-1])


# ---------------------------------------------------------------- Example 2 plans


def _x_mix(z: float) -> StationaryStrategy:
    dist = {"a": 1.0 - z, "b": z}
    return StationaryStrategy({"x": dist, "y": {"d": 1.0}, "z": {"e": 1.0}})


def example2_plan(rows: Sequence[float], tail: float) -> MarkovPlan:
    """Plan playing ``b`` at ``x`` with probability ``rows[n-1]`` in period ``n``, then ``tail``."""
    return MarkovPlan(tuple(_x_mix(z) for z in rows), _x_mix(tail))


def pure_b_plan(n: int) -> MarkovPlan:
    """``a^(n-1) b``: ``a`` in the first ``n - 1`` periods and ``b`` in period ``n``."""
    return example2_plan([0.0] * (n - 1) + [1.0], 0.0)


def a_forever() -> StationaryStrategy:
    return _x_mix(0.0)


def plan_b_probs(plan: MarkovPlan | StationaryStrategy, periods: int) -> np.ndarray:
    """``z_n``, the probability of ``b`` at ``x`` in period ``n``, for ``n = 1..periods``."""
    at = (lambda n: plan) if isinstance(plan, StationaryStrategy) else plan.at
    out = np.empty(periods)
    for n in range(1, periods + 1):
        dist = at(n).dist("x")
        extra = set(dist) - {"a", "b"}
        if extra:
            raise PlanError(f"period {n}: unexpected actions {sorted(extra)} at x")
        out[n - 1] = dist.get("b", 0.0)
    return out


def prob_b_at(z: np.ndarray) -> np.ndarray:
    """``P(a_n = b)`` from ``z``: still at ``x`` after ``n - 1`` periods, then ``b``."""
    stay = np.concatenate(([1.0], np.cumprod(1.0 - z)[:-1]))
    return stay * z


def example2_improve(plan: MarkovPlan | StationaryStrategy, horizon: int = 20) -> MarkovPlan:
    """A plan whose curve is strictly higher at every period after the first use of ``b``.

    If ``b`` is never used, or is used with probability one at some period,
    the stationary half-half plan is returned.  Otherwise, with ``m`` the
    first period where ``z_m > 0`` and ``H = max(horizon, m + 1)``, ``z_m``
    is lowered and every later ``z_n`` raised to ``z_n + eta (1 - z_n)`` so
    that ``prod_{n <= H} (1 - z_n)`` is unchanged.  The new curve is lower at
    period ``m + 1`` and strictly higher at every period in ``(m + 1, H + 1]``.
    """
    if isinstance(plan, StationaryStrategy):
        plan = MarkovPlan((), plan)
    explicit = plan.horizon
    z_all = plan_b_probs(plan, explicit + 1)
    z_tail = z_all[-1]
    if np.all(z_all == 0.0) or np.any(z_all >= 1.0):
        return MarkovPlan((), _x_mix(0.5))
    m = int(np.flatnonzero(z_all > 0)[0]) + 1
    H = max(horizon, m + 1, explicit)
    z = plan_b_probs(plan, H)
    k = H - m
    eta = 0.5 * -math.expm1(math.log1p(-z[m - 1]) / k)
    new = z.copy()
    new[m:] = z[m:] + eta * (1.0 - z[m:])
    new[m - 1] = -math.expm1(math.log1p(-z[m - 1]) - k * math.log1p(-eta))
    return example2_plan(new.tolist(), z_tail + eta * (1.0 - z_tail))


# ---------------------------------------------------------------- Example 3 plans


def example3_plan(t: int) -> MarkovPlan:
    """``a^t c``: ``a`` at ``x`` for ``t`` periods, then ``c``."""
    rest = {"x'": {"c'": 1.0}, "y": {"d": 1.0}, "z": {"e": 1.0}}
    a = StationaryStrategy({"x": {"a": 1.0}, **rest})
    c = StationaryStrategy({"x": {"c": 1.0}, **rest})
    return MarkovPlan((a,) * t, c)


def example3_a_forever() -> StationaryStrategy:
    return StationaryStrategy({"x": {"a": 1.0}, "x'": {"c'": 1.0}, "y": {"d": 1.0}, "z": {"e": 1.0}})


def example3_chain(span: int = 25, objective: Objective | str = Objective.REACH) -> list[dict]:
    """Verdicts for ``c`` against ``a^inf`` and ``a^(t+1) c`` against ``a^t c``, ``t = 0..6``.

    The later plan can only be ahead once both have switched, so each window
    starts two periods after the earlier switch.  The lead shrinks like
    ``2^-t`` relative to the surviving mass, so windows are ``span`` periods
    long to stay above the comparison tolerance.
    """
    mdp = build_example3(objective)
    obj = Objective(objective)
    horizon = span + 10
    rows = []
    base = reach_curve(mdp, example3_a_forever(), "x", horizon)
    first = reach_curve(mdp, example3_plan(0), "x", horizon)
    v = compare(first, base, (2, span + 1), obj)
    rows.append({"pair": "c vs a^inf", "window": [2, span + 1], "verdict": v.kind.value})
    for t in range(7):
        early = reach_curve(mdp, example3_plan(t), "x", horizon)
        late = reach_curve(mdp, example3_plan(t + 1), "x", horizon)
        window = (t + 3, t + 2 + span)
        v = compare(late, early, window, obj)
        rows.append({"pair": f"a^{t + 1}c vs a^{t}c", "window": list(window), "verdict": v.kind.value})
    return rows


# ---------------------------------------------------------------- claims


@dataclass(frozen=True)
class ClaimResult:
    claim_id: str
    status: str
    evidence: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    def to_json(self) -> dict:
        return {"claim": self.claim_id, "status": self.status, "passed": self.passed, "evidence": self.evidence}


def _status(ok: bool) -> str:
    return "passed" if ok else "failed"


def example1_crossover_oracle(p: float, q: float) -> int:
    """First period from which ``a`` stays ahead of ``b``, from the closed-form survivals.

    Survival after period ``t`` is ``(1-q)^(t-1)`` under ``a`` and
    ``(1-p)^(t-2) / 2`` under ``b``.
    """
    bound = 2 + (math.log1p(-q) + math.log(2)) / (math.log1p(-p) - math.log1p(-q))
    return max(2, math.floor(bound) + 1)


def _claim_overtaking(mdp: Mdp, p: float, q: float, horizon: int) -> ClaimResult:
    a, b = StationaryStrategy.pure({"x": "a", "y": "c", "z": "d"}), StationaryStrategy.pure({"x": "b", "y": "c", "z": "d"})
    oracle = example1_crossover_oracle(p, q)
    if horizon < 60:
        return ClaimResult("example1-overtaking", "inconclusive", {
            "reason": f"window [60, {horizon}] is empty", "crossover_oracle": oracle,
        })
    ca, cb = reach_curve(mdp, a, "x", horizon), reach_curve(mdp, b, "x", horizon)
    verdict = compare(ca, cb, (60, horizon))
    crossover = empirical_crossover(ca, cb)
    if crossover is None or crossover > horizon:
        status = "inconclusive"
    else:
        status = _status(verdict.kind is VerdictKind.OVERTAKES and crossover == oracle)
    return ClaimResult("example1-overtaking", status, {
        "window": [60, horizon], "verdict": verdict.kind.value,
        "crossover": crossover, "crossover_oracle": oracle,
    })


def _claim_discounted(mdp: Mdp, p: float, q: float) -> ClaimResult:
    a, b = StationaryStrategy.pure({"x": "a", "y": "c", "z": "d"}), StationaryStrategy.pure({"x": "b", "y": "c", "z": "d"})
    rows = []
    for beta in (0.99, 0.999):
        da, db = discounted_value(mdp, a, beta, "x"), discounted_value(mdp, b, beta, "x")
        rows.append({"beta": beta, "D_a": da, "D_b": db})
    return ClaimResult("example1-discounted", _status(all(r["D_b"] > r["D_a"] for r in rows)), {"values": rows})


def _claim_hitting(mdp: Mdp, p: float, q: float) -> ClaimResult:
    a, b = StationaryStrategy.pure({"x": "a", "y": "c", "z": "d"}), StationaryStrategy.pure({"x": "b", "y": "c", "z": "d"})
    ea, eb = expected_hitting_time(mdp, a, "x"), expected_hitting_time(mdp, b, "x")
    ok = eb < ea and abs(ea - 1 / q) <= 1e-10 and abs(eb - (1 + 1 / (2 * p))) <= 1e-10
    return ClaimResult("example1-hitting-time", _status(ok), {
        "E_a": ea, "E_b": eb, "closed_form_a": 1 / q, "closed_form_b": 1 + 1 / (2 * p),
    })


def _claim_pure_tie(T: int = 20) -> ClaimResult:
    mdp = build_example2()
    t = np.arange(1, T + 1)
    ref = 1.0 - 2.0 ** (1 - t)
    worst = float(np.abs(reach_curve(mdp, a_forever(), "x", T).values - ref).max())
    for n in range(1, T - 1):
        # a^(n-1) b plays b in period n and the free move d in period n + 1
        vals = reach_curve(mdp, pure_b_plan(n), "x", T).values
        worst = max(worst, float(np.abs(vals[n + 1:] - ref[n + 1:]).max()))
    return ClaimResult("example2-pure-tie", _status(worst <= CURVE_TOL), {
        "horizon": T, "plans": T - 1, "max_deviation": worst,
    })


GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def later_b_grid(t_range=range(3, 13)) -> dict:
    """Sign equivalence between curve differences and ``P(a_(t-1) = b)`` differences.

    Plans range over ``z_1, z_2, tail`` in a five-point grid (125 plans).
    """
    mdp = build_example2()
    T = max(t_range)
    plans = [(z1, z2, zt) for z1 in GRID for z2 in GRID for zt in GRID]
    curves = np.array([reach_curve(mdp, example2_plan([z1, z2], zt), "x", T).values for z1, z2, zt in plans])
    probs = np.array([prob_b_at(np.array([z1, z2] + [zt] * (T - 2))) for z1, z2, zt in plans])
    mismatches = 0
    checked = 0
    for t in t_range:
        v = curves[:, t - 1]
        pb = probs[:, t - 2]
        dv = v[:, None] - v[None, :]
        dp = pb[:, None] - pb[None, :]
        sv = np.where(np.abs(dv) <= 1e-13, 0, np.sign(dv))
        sp = np.where(np.abs(dp) <= 1e-13, 0, np.sign(dp))
        relevant = (sv != 0) | (sp != 0)
        mismatches += int(np.count_nonzero(relevant & (sv != sp)))
        checked += int(np.count_nonzero(relevant))
    return {"plans": len(plans), "pairs_checked": checked, "mismatches": mismatches}


def sample_plans(count: int, seed: int = 0, horizon: int = 20) -> list[MarkovPlan]:
    """Case-2 plans: zero before a random first period ``m``, then probabilities in (0, 0.9)."""
    rng = np.random.default_rng(seed)
    plans = []
    for _ in range(count):
        m = int(rng.integers(1, 11))
        z = np.zeros(horizon)
        z[m - 1] = rng.uniform(0.05, 0.95)
        z[m:] = rng.uniform(0.0, 0.9, horizon - m)
        plans.append(example2_plan(z.tolist(), float(rng.uniform(0.0, 0.9))))
    return plans


def improvement_report(plan: MarkovPlan, horizon: int = 20) -> dict:
    """Check the improved plan against the original on periods ``m + 2 .. horizon + 1``."""
    mdp = build_example2()
    new = example2_improve(plan, horizon)
    z = plan_b_probs(plan, horizon)
    zn = plan_b_probs(new, horizon)
    m = int(np.flatnonzero(z > 0)[0]) + 1
    old_c = reach_curve(mdp, plan, "x", horizon + 1)
    new_c = reach_curve(mdp, new, "x", horizon + 1)
    adv = advantage(new_c, old_c, Objective.REACH, m + 2, horizon + 1)
    product_gap = abs(float(np.prod(1 - zn) - np.prod(1 - z)))
    structural = (
        np.array_equal(zn[: m - 1], z[: m - 1])
        and zn[m - 1] < z[m - 1]
        and bool(np.all((zn[m:] > z[m:]) & (zn[m:] < 1)))
        and product_gap <= 1e-12
    )
    return {
        "m": m,
        "strict_periods": [m + 2, horizon + 1],
        "min_advantage": float(adv.min()) if len(adv) else None,
        "product_gap": product_gap,
        "structural": bool(structural),
        "improved": bool(structural and np.all(adv > 0)),
    }


def _claim_improve(count: int = 20, seed: int = 0) -> ClaimResult:
    reports = [improvement_report(p) for p in sample_plans(count, seed)]
    case1 = example2_improve(pure_b_plan(1))
    case1_ok = plan_b_probs(case1, 3).tolist() == [0.5] * 3
    ok = case1_ok and all(r["improved"] for r in reports)
    return ClaimResult("example2-improve", _status(ok), {"case1_half_half": case1_ok, "plans": reports})


def _claim_chain() -> ClaimResult:
    rows = example3_chain()
    ok = all(r["verdict"] == VerdictKind.OVERTAKES.value for r in rows)
    return ClaimResult("example3-chain", _status(ok), {"comparisons": rows})


def incomparable_signs(horizon: int) -> dict:
    mdp = build_incomparable()
    sigma, sigma2 = incomparable_pair(horizon)
    d = advantage(reach_curve(mdp, sigma, "x", horizon), reach_curve(mdp, sigma2, "x", horizon),
                  Objective.REACH, 1, horizon)
    t = np.arange(1, horizon + 1)
    equal = np.abs(d) <= 1e-10
    expected = {1: "equal", 2: "sigma", 0: "sigma2"}
    observed = np.where(equal, "equal", np.where(d > 0, "sigma", "sigma2"))
    bad = [int(k) for k in t if observed[k - 1] != expected[k % 3]]
    return {"horizon": horizon, "violations": bad[:10], "violation_count": len(bad)}


def _claim_incomparable(horizon: int) -> ClaimResult:
    ev = incomparable_signs(horizon)
    return ClaimResult("incomparable", _status(ev["violation_count"] == 0), ev)


CLAIM_IDS = (
    "example1-overtaking",
    "example1-discounted",
    "example1-hitting-time",
    "example2-pure-tie",
    "example2-later-b",
    "example2-improve",
    "example3-chain",
    "incomparable",
)


def check_claims(horizon: int = 300, p: float = 0.1, q: float = 0.11, seed: int = 0) -> list[ClaimResult]:
    """Run every finite check; failures are reported, never raised."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    mdp = build_example1(p, q)
    grid = later_b_grid()
    return [
        _claim_overtaking(mdp, p, q, horizon),
        _claim_discounted(mdp, p, q),
        _claim_hitting(mdp, p, q),
        _claim_pure_tie(),
        ClaimResult("example2-later-b", _status(grid["mismatches"] == 0), grid),
        _claim_improve(seed=seed),
        _claim_chain(),
        _claim_incomparable(horizon),
    ]
