"""Spectral comparison of stationary strategies.

The absorption rate of a stationary strategy is the second eigenvalue of its
induced matrix, which equals the Perron root of the reduced matrix (target
row and column deleted).  Strategies are ranked by that root: smaller is
better for Reach, larger for Safety.

Without an explicit initial state, matrices are restricted to the states
reachable from the first declared non-target state.  When every row is
strictly positive this restriction keeps every state.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from functools import cmp_to_key
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .mdp import Mdp, Objective, validate
from .strategy import (
    StationaryStrategy,
    TransitionMatrix,
    enumerate_pure_stationary,
    induced_matrix,
)

RESIDUAL_TOL = 1e-10
AGREEMENT_TOL = 1e-8
STEP2_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-9


class SpectralError(ArithmeticError):
    pass


class EigenError(SpectralError):
    """Eigensolver failure; ``partial`` holds whatever was computed."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class PerronError(SpectralError):
    pass


class MixingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReducedMatrix:
    """Substochastic matrix over the non-target ``states``."""

    matrix: np.ndarray
    states: tuple[str, ...]

    def restrict(self, keep: Sequence[str]) -> "ReducedMatrix":
        idx = [self.states.index(s) for s in keep]
        return ReducedMatrix(self.matrix[np.ix_(idx, idx)], tuple(keep))

    def reachable_from(self, state: str) -> "ReducedMatrix":
        """Restriction to the states reachable from ``state`` (declaration order kept)."""
        order = breadth_first_order(
            csr_matrix(self.matrix > 0), self.states.index(state), directed=True,
            return_predecessors=False,
        )
        keep = sorted(int(i) for i in order)
        return self.restrict([self.states[i] for i in keep])


def reduced_matrix(tm: TransitionMatrix) -> ReducedMatrix:
    keep = [i for i, s in enumerate(tm.states) if s != tm.target]
    return ReducedMatrix(
        tm.matrix[np.ix_(keep, keep)].copy(), tuple(tm.states[i] for i in keep)
    )


def _as_array(m) -> np.ndarray:
    return np.asarray(m.matrix if isinstance(m, ReducedMatrix) else m, dtype=float)


def _eig_order(x: complex, y: complex, tol: float) -> int:
    if abs(abs(x) - abs(y)) > tol:
        return -1 if abs(x) > abs(y) else 1
    if abs(x.real - y.real) > tol:
        return -1 if x.real > y.real else 1
    if abs(x.imag - y.imag) > tol:
        return -1 if x.imag > y.imag else 1
    return 0


def eigenvalues(m) -> list[complex]:
    """All eigenvalues, by modulus descending, then real part, then imaginary part.

    LAPACK's Hessenberg QR does the work; each eigenpair is accepted only if
    its residual is at most ``1e-10 * ||M||``.
    """
    a = _as_array(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("eigenvalues needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.size == 0:
        return []
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigensolver did not converge: {exc}") from exc
    norm = max(np.linalg.norm(a, 2), np.finfo(float).tiny)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    residual = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    if np.any(residual > RESIDUAL_TOL * norm):
        raise EigenError(
            f"eigenpair residual {residual.max():.3g} exceeds {RESIDUAL_TOL} * ||M||",
            partial=list(vals),
        )
    tol = 1e-12 * max(1.0, float(np.abs(vals).max()))
    return sorted(
        (complex(v) for v in vals), key=cmp_to_key(lambda x, y: _eig_order(x, y, tol))
    )


def _power_root(b: np.ndarray, max_iter: int = 200_000) -> tuple[float, np.ndarray]:
    """Perron root of an irreducible nonnegative matrix by power iteration.

    A unit shift makes the iteration primitive when ``b`` has zero entries;
    the Collatz-Wielandt bounds ``min (Cx)/x <= rho(C) <= max (Cx)/x`` give the
    stopping test.
    """
    n = len(b)
    shift = 0.0 if np.all(b > 0) else 1.0
    c = b + shift * np.eye(n)
    x = np.full(n, 1.0 / n)
    lo, hi = 0.0, math.inf
    for _ in range(max_iter):
        y = c @ x
        ratio = y / x
        lo, hi = float(ratio.min()), float(ratio.max())
        x = y / y.sum()
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi) - shift, x


def perron_pair(m) -> tuple[float, np.ndarray]:
    """Perron root and a nonnegative eigenvector (entries summing to 1).

    The root is the largest over strongly connected blocks, each found by
    power iteration, and must agree with the largest eigenvalue modulus from
    :func:`eigenvalues` within ``1e-8``.  The vector is exact only for
    irreducible input; for reducible input it comes from the eigensolver.
    """
    a = _as_array(m)
    if np.any(a < 0):
        raise ValueError("Perron root needs a nonnegative matrix")
    n = len(a)
    if n == 0:
        raise ValueError("empty matrix")
    n_comp, labels = connected_components(csr_matrix(a > 0), directed=True, connection="strong")
    root = 0.0
    vector = None
    for k in range(n_comp):
        idx = np.flatnonzero(labels == k)
        block = a[np.ix_(idx, idx)]
        if len(idx) == 1:
            r, v = float(block[0, 0]), np.ones(1)
        else:
            r, v = _power_root(block)
        root = max(root, r)
        if n_comp == 1:
            vector = v
    spectrum = eigenvalues(a)
    top = abs(spectrum[0])
    if abs(root - top) > AGREEMENT_TOL:
        raise PerronError(
            f"power iteration gives {root!r} but the eigensolver gives {top!r}"
        )
    if n_comp != 1:
        vals, vecs = np.linalg.eig(a)
        j = int(np.argmin(np.abs(vals - root)))
        vector = np.abs(vecs[:, j].real)
    vector = vector / vector.sum()
    return root, vector


def perron_root(m) -> float:
    return perron_pair(m)[0]


def default_initial(mdp: Mdp) -> str:
    return mdp.nontarget[0]


def strategy_reduced(
    mdp: Mdp, sigma: StationaryStrategy, initial: str | None = None
) -> ReducedMatrix:
    """Reduced matrix of ``sigma`` restricted to the states reachable from ``initial``."""
    red = reduced_matrix(induced_matrix(mdp, sigma))
    return red.reachable_from(initial or default_initial(mdp))


def full_second_modulus(tm: TransitionMatrix) -> float:
    spectrum = eigenvalues(tm.matrix)
    return abs(spectrum[1]) if len(spectrum) > 1 else 0.0


def lambda2(mdp: Mdp, sigma: StationaryStrategy, initial: str | None = None) -> float:
    """Absorption rate: Perron root of the (reachable) reduced matrix.

    When every row is strictly positive, the value is also checked against the
    second-largest eigenvalue modulus of the full induced matrix.
    """
    value = perron_root(strategy_reduced(mdp, sigma, initial))
    if validate(mdp).positivity:
        second = full_second_modulus(induced_matrix(mdp, sigma))
        if abs(value - second) > STEP2_TOL:
            raise SpectralError(
                f"Perron root {value!r} disagrees with the full matrix's second eigenvalue {second!r}"
            )
    return value


class Ordering(str, Enum):
    FIRST = "First"
    SECOND = "Second"
    TIE = "Tie"


def _better(objective: Objective, x: float, y: float, gap_tol: float) -> Ordering:
    if abs(x - y) <= gap_tol:
        return Ordering.TIE
    first_wins = x < y if objective is Objective.REACH else x > y
    return Ordering.FIRST if first_wins else Ordering.SECOND


def spectral_compare(
    mdp: Mdp,
    sigma: StationaryStrategy,
    sigma2: StationaryStrategy,
    gap_tol: float = DEFAULT_GAP_TOL,
    initial: str | None = None,
) -> Ordering:
    """Which strategy the absorption rates predict to overtake the other."""
    return _better(
        mdp.objective, lambda2(mdp, sigma, initial), lambda2(mdp, sigma2, initial), gap_tol
    )


@dataclass(frozen=True)
class SpectralEntry:
    index: int
    strategy: StationaryStrategy
    lambda2: float
    eigenvalues: tuple[complex, ...]
    full_second: float

    @property
    def profile(self) -> str:
        return self.strategy.profile()


@dataclass(frozen=True)
class SpectralReport:
    entries: tuple[SpectralEntry, ...]
    min_gap: float
    generic: bool
    selected: int
    objective: Objective
    gap_tol: float

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lambda2 for e in self.entries])

    def nearest_gap(self, i: int) -> float:
        lam = self.lambdas
        others = np.delete(lam, i)
        return float(np.abs(others - lam[i]).min()) if len(others) else math.inf

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["strategy_index", "action_profile", "lambda2", "generic_gap"])
        for e in self.entries:
            w.writerow([e.index, e.profile, f"{e.lambda2:.17g}", f"{self.nearest_gap(e.index):.17g}"])
        sel = self.entries[self.selected]
        w.writerow(["selected", sel.profile, f"{sel.lambda2:.17g}", f"{self.min_gap:.17g}"])
        return out.getvalue()


def report_from_csv(text: str) -> dict:
    """Parse :meth:`SpectralReport.to_csv` output into plain rows and the selection."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["strategy_index", "action_profile", "lambda2", "generic_gap"]:
        raise ValueError("not a spectral report CSV")
    body, summary = rows[1:-1], rows[-1]
    if summary[0] != "selected":
        raise ValueError("missing trailing 'selected' row")
    parsed = [
        {"index": int(r[0]), "profile": r[1], "lambda2": float(r[2]), "gap": float(r[3])}
        for r in body
    ]
    selected = next(p["index"] for p in parsed if p["profile"] == summary[1])
    return {"rows": parsed, "selected": selected, "min_gap": float(summary[3])}


def genericity_check(
    mdp: Mdp, gap_tol: float = DEFAULT_GAP_TOL, initial: str | None = None
) -> SpectralReport:
    """Absorption rates of every pure stationary strategy and their minimum gap."""
    positive = validate(mdp).positivity
    entries = []
    for i, sigma in enumerate(enumerate_pure_stationary(mdp)):
        tm = induced_matrix(mdp, sigma)
        spectrum = tuple(eigenvalues(tm.matrix))
        lam = perron_root(strategy_reduced(mdp, sigma, initial))
        second = abs(spectrum[1]) if len(spectrum) > 1 else 0.0
        if positive and abs(lam - second) > STEP2_TOL:
            raise SpectralError(
                f"strategy {i}: Perron root {lam!r} disagrees with second eigenvalue {second!r}"
            )
        entries.append(SpectralEntry(i, sigma, lam, spectrum, second))
    lam = np.array([e.lambda2 for e in entries])
    ordered = np.sort(lam)
    min_gap = float(np.diff(ordered).min()) if len(lam) > 1 else math.inf
    best = lam.min() if mdp.objective is Objective.REACH else lam.max()
    selected = int(np.flatnonzero(np.abs(lam - best) <= gap_tol)[0])
    return SpectralReport(
        tuple(entries), min_gap, min_gap > gap_tol, selected, mdp.objective, gap_tol
    )


def best_pure_stationary(
    mdp: Mdp, gap_tol: float = DEFAULT_GAP_TOL, initial: str | None = None
) -> tuple[StationaryStrategy, SpectralReport]:
    """Pure stationary strategy with the smallest (Reach) or largest (Safety) rate.

    Near-ties resolve to the lowest enumeration index; ``report.generic`` is
    False whenever two rates are within ``gap_tol``.
    """
    report = genericity_check(mdp, gap_tol, initial)
    return report.entries[report.selected].strategy, report


def _differing_rows(a: np.ndarray, b: np.ndarray) -> list[int]:
    return [i for i in range(len(a)) if not np.array_equal(a[i], b[i])]


def mix_one_row_scan(a, b, grid: int = 11) -> list[tuple[float, float]]:
    """Perron root of ``alpha*A + (1-alpha)*B`` on an even grid of ``alpha`` in [0, 1].

    ``A`` and ``B`` must be strictly positive and differ in at most one row;
    in that regime the root is monotone in ``alpha``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("A and B must be square matrices of the same order")
    if grid < 3:
        raise ValueError("grid must be at least 3")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("A and B must be strictly positive")
    rows = _differing_rows(a, b)
    if len(rows) > 1:
        raise MixingError(
            f"matrices differ in rows {rows}; one-row mixing monotonicity does not apply"
        )
    return [(float(al), perron_root(al * a + (1 - al) * b)) for al in np.linspace(0.0, 1.0, grid)]


def scan_shape(values: Sequence[float], tol: float = 1e-10) -> str:
    """``"constant"``, ``"increasing"``, ``"decreasing"`` (strict), ``"monotone"`` or ``"none"``."""
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    if np.all(np.abs(v - v[0]) <= tol):
        return "constant"
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    if np.all(d >= -tol) or np.all(d <= tol):
        return "monotone"
    return "none"
