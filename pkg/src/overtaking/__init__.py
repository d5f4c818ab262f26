"""Overtaking optimality for MDPs with reachability and safety objectives.

A strategy overtakes another when its probability of having reached the
target (or, for safety, of having avoided it) is eventually larger at every
period.  The package evaluates these curves exactly, ranks stationary
strategies by absorption rate, certifies the period from which the ranking
shows in the curves, and handles deterministic MDPs through a log transform
to average-payoff MDPs.
"""

from .blackwell import (
    AverageMdp,
    LoopReport,
    blackwell_optimal,
    loop_report,
    not_weakly_overtaken_check,
    to_average_mdp,
)
from .evaluate import (
    ReachCurve,
    Verdict,
    VerdictKind,
    compare,
    discounted_value,
    expected_hitting_time,
    hitting_probability,
    reach_curve,
)
from .horizon import HorizonCertificate, certified_horizon, empirical_crossover, jordan_constants
from .mdp import Mdp, Objective, load_mdp, normalize, sample_deterministic, sample_generic, validate
from .spectral import (
    SpectralReport,
    best_pure_stationary,
    eigenvalues,
    genericity_check,
    lambda2,
    mix_one_row_scan,
    perron_root,
    reduced_matrix,
)
from .strategy import (
    MarkovPlan,
    StationaryStrategy,
    enumerate_pure_stationary,
    induced_matrix,
    stationary_from_first_actions,
)

__version__ = "0.1.0"

__all__ = [
    "AverageMdp",
    "HorizonCertificate",
    "LoopReport",
    "MarkovPlan",
    "Mdp",
    "Objective",
    "ReachCurve",
    "SpectralReport",
    "StationaryStrategy",
    "Verdict",
    "VerdictKind",
    "best_pure_stationary",
    "blackwell_optimal",
    "certified_horizon",
    "compare",
    "discounted_value",
    "eigenvalues",
    "empirical_crossover",
    "enumerate_pure_stationary",
    "expected_hitting_time",
    "genericity_check",
    "hitting_probability",
    "induced_matrix",
    "jordan_constants",
    "lambda2",
    "load_mdp",
    "loop_report",
    "mix_one_row_scan",
    "normalize",
    "not_weakly_overtaken_check",
    "perron_root",
    "reach_curve",
    "reduced_matrix",
    "sample_deterministic",
    "sample_generic",
    "stationary_from_first_actions",
    "to_average_mdp",
    "validate",
]
