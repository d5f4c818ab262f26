"""Deterministic MDPs: the log transform, loop values and Blackwell-optimal policies.

In a deterministic MDP every action splits its mass between the target and
one non-target successor.  Taking ``u'(s, a) = -ln p(successor | s, a)``
(Reach) or ``+ln p`` (Safety) turns survival into ``exp(-sum u')`` or
``exp(+sum u')``, so in both cases a larger payoff sum means a better curve
and the question becomes one about deterministic average-payoff MDPs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import ROW_TOL, Mdp, MdpError, Objective
from .strategy import StationaryStrategy

LOOP_STATE_CAP = 12
PATH_CAP = 10**6
BETA_EXPONENTS = (2, 3, 4, 5, 6)
RESIDUAL_TOL = 1e-10


class BlackwellError(ArithmeticError):
    pass


@dataclass(frozen=True)
class AverageMdp:
    states: tuple[str, ...]
    actions: dict[str, tuple[str, ...]]
    successor: dict[tuple[str, str], str]
    payoff: dict[tuple[str, str], float]
    objective: Objective

    @property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}


def _successor_mass(mdp: Mdp, s: str, a: str) -> list[tuple[str, float]]:
    row = mdp.row(s, a)
    return [(z, float(row[mdp.index[z]])) for z in mdp.nontarget if row[mdp.index[z]] > 0]


def to_average_mdp(mdp: Mdp) -> AverageMdp:
    """Log transform of a deterministic, normalized MDP."""
    bad = []
    successor, payoff = {}, {}
    for s in mdp.nontarget:
        for a in mdp.actions(s):
            support = _successor_mass(mdp, s, a)
            if len(support) != 1:
                bad.append((s, a))
                continue
            z, p = support[0]
            if p <= ROW_TOL:
                bad.append((s, a))
                continue
            successor[(s, a)] = z
            lp = math.log(p)
            payoff[(s, a)] = -lp if mdp.objective is Objective.REACH else lp
    if bad:
        listed = ", ".join(f"({s}, {a})" for s, a in bad)
        raise MdpError(
            "MDP is not deterministic and normalized; offending state-action pairs: " + listed
        )
    return AverageMdp(
        mdp.nontarget,
        {s: mdp.actions(s) for s in mdp.nontarget},
        successor,
        payoff,
        mdp.objective,
    )


Cycle = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class LoopReport:
    loops: tuple[tuple[Cycle, float], ...]
    delta: float | None

    def to_csv(self) -> str:
        lines = ["cycle,phi"]
        for cycle, phi in self.loops:
            lines.append(f"{format_cycle(cycle)},{phi:.17g}")
        lines.append("delta," + ("" if self.delta is None else f"{self.delta:.17g}"))
        return "\n".join(lines) + "\n"


def format_cycle(cycle: Cycle) -> str:
    return ">".join(f"{s}:{a}" for s, a in cycle)


def parse_loop_csv(text: str) -> LoopReport:
    lines = text.strip().splitlines()
    if not lines or lines[0] != "cycle,phi" or not lines[-1].startswith("delta,"):
        raise ValueError("not a loop report CSV")
    loops = []
    for line in lines[1:-1]:
        cyc, phi = line.rsplit(",", 1)
        steps = tuple(tuple(step.split(":", 1)) for step in cyc.split(">"))
        loops.append((steps, float(phi)))
    tail = lines[-1].split(",", 1)[1]
    return LoopReport(tuple(loops), float(tail) if tail else None)


def simple_cycles(avg: AverageMdp, cap: int = LOOP_STATE_CAP) -> list[Cycle]:
    """All simple cycles of the state-action multigraph.

    Each cycle is rooted at its lowest-indexed state, so every cycle appears
    once; parallel actions give distinct cycles.
    """
    if len(avg.states) > cap:
        raise BlackwellError(f"{len(avg.states)} states exceed the loop enumeration cap of {cap}")
    idx = avg.index
    cycles: list[Cycle] = []
    for root in avg.states:
        r = idx[root]
        stack = [(root, (), frozenset([root]))]
        while stack:
            s, path, seen = stack.pop()
            for a in reversed(avg.actions[s]):
                z = avg.successor[(s, a)]
                step = path + ((s, a),)
                if z == root:
                    cycles.append(step)
                elif idx[z] > r and z not in seen:
                    stack.append((z, step, seen | {z}))
    return cycles


def loop_report(avg: AverageMdp, cap: int = LOOP_STATE_CAP) -> LoopReport:
    loops = tuple((c, math.fsum(avg.payoff[sa] for sa in c)) for c in simple_cycles(avg, cap))
    negative = [phi for _, phi in loops if phi < 0]
    return LoopReport(loops, max(negative) if negative else None)


def optimal_gain(avg: AverageMdp, initial: str, cap: int = LOOP_STATE_CAP) -> float:
    """Best long-run average payoff from ``initial``: the maximum mean over reachable simple cycles."""
    reach = {initial}
    frontier = [initial]
    while frontier:
        s = frontier.pop()
        for a in avg.actions[s]:
            z = avg.successor[(s, a)]
            if z not in reach:
                reach.add(z)
                frontier.append(z)
    return max(
        math.fsum(avg.payoff[sa] for sa in c) / len(c)
        for c in simple_cycles(avg, cap)
        if c[0][0] in reach
    )


def _policy_values(avg: AverageMdp, policy: Sequence[int], beta: float) -> np.ndarray:
    """Discounted values of a pure policy, summing each trajectory's cycle in closed form.

    Avoids solving ``(I - beta P) v = r``, whose conditioning degrades like
    ``1 / (1 - beta)``.
    """
    idx = avg.index
    n = len(avg.states)
    nxt = np.empty(n, dtype=int)
    rew = np.empty(n)
    for i, s in enumerate(avg.states):
        a = avg.actions[s][policy[i]]
        nxt[i] = idx[avg.successor[(s, a)]]
        rew[i] = avg.payoff[(s, a)]
    v = np.full(n, np.nan)
    log_beta = math.log1p(-(1.0 - beta))
    for start in range(n):
        if not np.isnan(v[start]):
            continue
        order, pos = [], {}
        s = start
        while s not in pos and np.isnan(v[s]):
            pos[s] = len(order)
            order.append(s)
            s = nxt[s]
        if np.isnan(v[s]):
            cyc = order[pos[s]:]
            total = 0.0
            for j in reversed(cyc):
                total = rew[j] + beta * total
            v[s] = total / -math.expm1(len(cyc) * log_beta)
            for j in reversed(cyc[1:]):
                v[j] = rew[j] + beta * v[nxt[j]]
            order = order[: pos[s]]
        for j in reversed(order):
            v[j] = rew[j] + beta * v[nxt[j]]
    return v


def _q_table(avg: AverageMdp, v: np.ndarray, beta: float) -> list[np.ndarray]:
    idx = avg.index
    return [
        np.array([avg.payoff[(s, a)] + beta * v[idx[avg.successor[(s, a)]]] for a in avg.actions[s]])
        for s in avg.states
    ]


def discounted_policy(
    avg: AverageMdp, beta: float, start: Sequence[int] | None = None
) -> tuple[list[int], np.ndarray, float]:
    """Policy iteration at discount ``beta``; returns policy, values and normalized residual."""
    policy = list(start) if start is not None else [0] * len(avg.states)
    for _ in range(10_000):
        v = _policy_values(avg, policy, beta)
        tol = 64 * np.finfo(float).eps * max(1.0, float(np.abs(v).max()))
        changed = False
        for i, q in enumerate(_q_table(avg, v, beta)):
            best = int(np.argmax(q))
            if q[best] > q[policy[i]] + tol:
                policy[i] = best
                changed = True
        if not changed:
            break
    else:
        raise BlackwellError(f"policy iteration did not terminate at beta={beta}")
    q = _q_table(avg, v, beta)
    bellman = np.array([qs.max() for qs in q])
    residual = (1.0 - beta) * float(np.abs(bellman - v).max())
    return policy, v, residual


def blackwell_optimal(
    avg: AverageMdp,
    exponents: Sequence[int] = BETA_EXPONENTS,
    residual_tol: float = RESIDUAL_TOL,
    stable_last: int = 3,
) -> StationaryStrategy:
    """Pure stationary policy that is discounted-optimal on the grid ``beta = 1 - 10**-k``.

    Policy iteration is warm-started from one grid point to the next.  The
    policy must be the same over the last ``stable_last`` grid points.
    """
    policy = None
    history = []
    for k in exponents:
        beta = 1.0 - 10.0 ** (-k)
        policy, _, residual = discounted_policy(avg, beta, policy)
        if residual > residual_tol:
            raise BlackwellError(f"Bellman residual {residual:.3g} at beta={beta} exceeds {residual_tol}")
        history.append(tuple(policy))
    if len(set(history[-stable_last:])) != 1:
        raise BlackwellError(
            "discounted-optimal policy is not stable across the last grid points; "
            "payoff ties may need exact arithmetic to resolve"
        )
    return StationaryStrategy.pure(
        {s: avg.actions[s][policy[i]] for i, s in enumerate(avg.states)}
    )


def policy_path(avg: AverageMdp, policy: StationaryStrategy, s0: str, steps: int) -> list[tuple[str, str]]:
    out = []
    s = s0
    for _ in range(steps):
        a = policy.action(s)
        out.append((s, a))
        s = avg.successor[(s, a)]
    return out


def revisit_segments(avg: AverageMdp, policy: StationaryStrategy, s0: str) -> list[list[tuple[str, str]]]:
    """Segments of the policy's path between consecutive visits to the same state."""
    path = policy_path(avg, policy, s0, 2 * len(avg.states) + 1)
    segments = []
    last: dict[str, int] = {}
    for k, (s, _) in enumerate(path):
        if s in last:
            segments.append(path[last[s]:k])
        last[s] = k
    return segments


def count_paths(avg: AverageMdp, s0: str, depth: int) -> int:
    """Number of action sequences of length ``depth`` starting at ``s0``."""
    counts = {s: 1 for s in avg.states}
    for _ in range(depth):
        counts = {
            s: sum(counts[avg.successor[(s, a)]] for a in avg.actions[s]) for s in avg.states
        }
    return counts[s0]


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    witness: tuple[str, tuple[str, ...]] | None
    max_identity_error: float
    paths: int

    def __bool__(self) -> bool:
        return self.passed


def _tables(mdp: Mdp, avg: AverageMdp):
    n = len(avg.states)
    width = max(len(a) for a in avg.actions.values())
    n_act = np.array([len(avg.actions[s]) for s in avg.states])
    succ = np.zeros((n, width), dtype=np.int64)
    pay = np.zeros((n, width))
    prob = np.ones((n, width))
    idx = avg.index
    for i, s in enumerate(avg.states):
        for j, a in enumerate(avg.actions[s]):
            z = avg.successor[(s, a)]
            succ[i, j] = idx[z]
            pay[i, j] = avg.payoff[(s, a)]
            prob[i, j] = mdp.row(s, a)[mdp.index[z]]
    return n_act, succ, pay, prob


def not_weakly_overtaken_check(
    mdp: Mdp,
    candidate: StationaryStrategy,
    H: int,
    window_start: int,
    cap: int = PATH_CAP,
    strict_fraction: float = 0.1,
) -> CheckResult:
    """Search all pure action paths of length ``H - 1`` for one that weakly overtakes the candidate.

    A path is a witness when, from the same initial state, its curve is at
    least the candidate's at every period in ``[window_start, H]`` and
    strictly better at no fewer than ``max(2, ceil(strict_fraction * (H - window_start)))``
    of them.  Curves are compared through payoff sums of the transformed MDP;
    along the way the survival identity ``prod p = exp(-+ sum u')`` is
    measured on every path.
    """
    if not 1 <= window_start <= H:
        raise ValueError("need 1 <= window_start <= H")
    avg = to_average_mdp(mdp)
    depth = H - 1
    for s0 in avg.states:
        total = count_paths(avg, s0, depth)
        if total > cap:
            raise BlackwellError(f"{total} paths from {s0!r} exceed the cap of {cap}")
    n_act, succ, pay, prob = _tables(mdp, avg)
    sign = -1.0 if avg.objective is Objective.REACH else 1.0
    need = max(2, math.ceil(strict_fraction * (H - window_start)))
    idx = avg.index
    max_err = 0.0
    n_paths = 0
    for s0 in avg.states:
        cand = np.zeros(depth + 1)
        s = s0
        for k in range(depth):
            a = candidate.action(s)
            cand[k + 1] = cand[k] + avg.payoff[(s, a)]
            s = avg.successor[(s, a)]
        state = np.array([idx[s0]])
        total = np.zeros(1)
        survival = np.ones(1)
        feasible = np.ones(1, dtype=bool)
        strict = np.zeros(1, dtype=np.int64)
        choices: list[np.ndarray] = []
        parents: list[np.ndarray] = []
        for k in range(depth + 1):
            if k >= window_start - 1:
                tol = 1e-12 * (1.0 + abs(cand[k]))
                diff = total - cand[k]
                feasible &= diff >= -tol
                strict += diff > tol
            if k == depth:
                break
            counts = n_act[state]
            parent = np.repeat(np.arange(len(state)), counts)
            starts = np.cumsum(counts) - counts
            choice = np.arange(len(parent)) - np.repeat(starts, counts)
            st = state[parent]
            total = total[parent] + pay[st, choice]
            survival = survival[parent] * prob[st, choice]
            feasible, strict = feasible[parent], strict[parent]
            state = succ[st, choice]
            parents.append(parent)
            choices.append(choice)
            max_err = max(max_err, float(np.abs(survival - np.exp(sign * total)).max()))
        n_paths += len(state)
        hits = np.flatnonzero(feasible & (strict >= need))
        if len(hits):
            return CheckResult(False, (s0, _rebuild(avg, s0, int(hits[0]), parents, choices)), max_err, n_paths)
    return CheckResult(True, None, max_err, n_paths)


def _rebuild(avg: AverageMdp, s0: str, leaf: int, parents, choices) -> tuple[str, ...]:
    picks = []
    i = leaf
    for parent, choice in zip(reversed(parents), reversed(choices)):
        picks.append(int(choice[i]))
        i = int(parent[i])
    actions = []
    s = s0
    for j in reversed(picks):
        a = avg.actions[s][j]
        actions.append(a)
        s = avg.successor[(s, a)]
    return tuple(actions)
