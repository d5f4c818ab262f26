"""Shared oracles for the dominance checks: batched curves and empirical crossovers."""

from __future__ import annotations

import numpy as np

from overtaking.evaluate import log_survival_table
from overtaking.mdp import Mdp, Objective
from overtaking.strategy import StationaryStrategy, reduced_array

MAX_HORIZON = 200_000


def relative_advantage(ls_best: np.ndarray, ls_other: np.ndarray, objective: Objective) -> np.ndarray:
    """Advantage of ``best`` relative to the larger survival; positive means ``best`` is ahead."""
    hi = np.maximum(ls_best, ls_other)
    rel = np.exp(ls_other - hi) - np.exp(ls_best - hi)
    return rel if objective is Objective.REACH else -rel


def crossover(adv: np.ndarray) -> int | None:
    """Smallest period from which ``adv`` stays strictly positive to the last period."""
    bad = np.flatnonzero(~(adv > 0))
    if len(bad) == 0:
        return 1
    if bad[-1] == len(adv) - 1:
        return None
    return int(bad[-1]) + 2


def dominance(
    mdp: Mdp,
    best: StationaryStrategy,
    others: list[StationaryStrategy],
    span: int = 100,
    start: int = 400,
) -> dict:
    """Empirical crossover of ``best`` against every strategy in ``others``, from every state.

    The horizon doubles until every pair is ahead at the last period and
    ``T_emp + span`` fits; then dominance on ``[T_emp, T_emp + span]`` is
    checked.  ``per_pair[k]`` is the crossover against ``others[k]`` (maximum
    over initial states).
    """
    mats = np.array([reduced_array(mdp, s) for s in [best, *others]])
    horizon = start
    while True:
        table = log_survival_table(mats, horizon)
        adv = relative_advantage(table[:1], table[1:], mdp.objective)
        per = [[crossover(adv[k, i]) for i in range(adv.shape[1])] for k in range(adv.shape[0])]
        if all(c is not None for row in per for c in row):
            per_pair = [max(row) for row in per]
            t_emp = max(per_pair)
            if t_emp + span <= horizon:
                window = adv[:, :, t_emp - 1 : t_emp + span]
                return {
                    "T_emp": t_emp,
                    "per_pair": per_pair,
                    "horizon": horizon,
                    "dominates": bool(np.all(window > 0)),
                    "min_advantage": float(window.min()),
                }
        if horizon >= MAX_HORIZON:
            return {"T_emp": None, "per_pair": None, "horizon": horizon, "dominates": False,
                    "min_advantage": float("nan")}
        horizon *= 2


def dominance_on(mdp: Mdp, best: StationaryStrategy, other: StationaryStrategy, t0: int, t1: int) -> bool:
    """Whether ``best`` is strictly ahead of ``other`` at every period in ``[t0, t1]`` from every state."""
    mats = np.array([reduced_array(mdp, best), reduced_array(mdp, other)])
    table = log_survival_table(mats, t1)
    adv = relative_advantage(table[0], table[1], mdp.objective)[:, t0 - 1 : t1]
    return bool(np.all(adv > 0))
