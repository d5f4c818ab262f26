"""Certified horizons beyond which the spectrally better strategy dominates.

For a reduced matrix ``M`` with simple Perron root ``rho``, the powers split
as ``M^t = rho^t P + R^t`` with ``P`` the Perron projector.  Bounding the
remainder gives constants with

    M^t(s, z) <= c * rho^t              for all t >= 1,
    M^t(s, z) >= c_tilde * rho^t        for all t >= m.

With ``c`` from the faster-absorbing strategy and ``(c_tilde, m)`` from the
slower one, any exponent ``E >= m`` with ``E^n (rho / rho')^E < c_tilde / c``
(``n`` the number of MDP states) separates the survival masses.  When a
reduced matrix has zero entries, ``min v(s) w(z)`` can vanish; the same
argument is then run on row sums, which is all the survival mass needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur

from .evaluate import ReachCurve, advantage
from .mdp import Mdp, Objective
from .spectral import (
    ReducedMatrix,
    default_initial,
    lambda2,
    strategy_reduced,
)
from .strategy import StationaryStrategy

SIMPLE_ROOT_TOL = 1e-8
COND_LIMIT = 1e8
TIE_TOL = 1e-9
VERIFY_SPAN = 50


class HorizonError(ArithmeticError):
    def __init__(self, message: str, certificate=None, period: int | None = None):
        super().__init__(message)
        self.certificate = certificate
        self.period = period


@dataclass(frozen=True)
class JordanConstants:
    c: float
    c_tilde: float
    m: int
    diagonalizable: bool
    rho: float
    mode: str = "entry"

    def __iter__(self):
        return iter((self.c, self.c_tilde, self.m, self.diagonalizable))


def _perron_index(vals: np.ndarray) -> int:
    mods = np.abs(vals)
    rho = mods.max()
    cands = np.flatnonzero(mods >= rho - SIMPLE_ROOT_TOL)
    return int(cands[np.argmax(vals[cands].real)])


def _first_below(kappa: float, ratio: float, target: float, power: int = 0) -> int:
    """Smallest t >= 1 past the peak of ``kappa t^power ratio^t`` where it is at most ``target``."""
    if kappa == 0.0 or ratio == 0.0:
        return 1
    log_r = math.log(ratio)
    t = max(1, math.ceil(power / -log_r)) if power else 1
    g = lambda x: math.log(kappa) + power * math.log(x) + x * log_r - math.log(target)
    if g(t) <= 0:
        return t
    hi = t
    while g(hi) > 0:
        hi *= 2
    lo = hi // 2 if hi > t else t
    while lo < hi:
        mid = (lo + hi) // 2
        if g(mid) <= 0:
            hi = mid
        else:
            lo = mid + 1
    return lo


def jordan_constants(
    m, mode: str = "entry", cond_limit: float = COND_LIMIT
) -> JordanConstants:
    """Constants ``(c, c_tilde, m)`` bounding the powers of a reduced matrix.

    ``mode="entry"`` bounds every entry of ``M^t``; ``mode="row"`` bounds row
    sums.  When the eigenvector matrix has condition number below
    ``cond_limit`` the eigendecomposition is used directly; otherwise the
    remainder is bounded through the Schur form of ``M - rho P`` and picks up
    a ``t^(n-1)`` factor.
    """
    a = np.asarray(m.matrix if isinstance(m, ReducedMatrix) else m, dtype=float)
    if mode not in ("entry", "row"):
        raise ValueError("mode must be 'entry' or 'row'")
    n = len(a)
    vals, vecs = np.linalg.eig(a)
    p = _perron_index(vals)
    rho = float(vals[p].real)
    others = np.delete(vals, p)
    if np.any(np.abs(others - rho) <= SIMPLE_ROOT_TOL):
        raise HorizonError("non-generic instance: the Perron root is not simple")
    sec = float(np.abs(others).max()) if len(others) else 0.0
    ratio = sec / rho
    cond = np.linalg.cond(vecs)
    if np.isfinite(cond) and cond < cond_limit:
        winv = np.linalg.inv(vecs)
        v = vecs[:, p].real
        w = winv[p, :].real
        if v.sum() < 0:
            v, w = -v, -w
        if mode == "row":
            wcol = winv.sum(axis=1)
            terms = np.abs(vecs) * np.abs(wcol)[None, :]
            c = float(terms.sum(axis=1).max())
            kappa = float(np.delete(terms, p, axis=1).sum(axis=1).max())
            floor = float((v * w.sum()).min())
        else:
            terms = np.abs(vecs)[:, :, None] * np.abs(winv)[None, :, :]
            c = float(terms.sum(axis=1).max())
            kappa = float(np.delete(terms, p, axis=1).sum(axis=1).max())
            floor = float(np.outer(v, w).min())
        if floor <= 0:
            raise HorizonError(
                f"Perron projector has a non-positive {'row sum' if mode == 'row' else 'entry'}"
            )
        return JordanConstants(
            c, 0.5 * floor, _first_below(kappa, ratio, 0.5 * floor), True, rho, mode
        )
    return _schur_constants(a, rho, sec, mode)


def _perron_projector(a: np.ndarray, rho: float) -> np.ndarray:
    def null_vec(mat):
        _, _, vh = np.linalg.svd(mat - rho * np.eye(len(mat)))
        x = vh[-1].real
        return x if x.sum() >= 0 else -x

    v = null_vec(a)
    w = null_vec(a.T)
    return np.outer(v, w) / (w @ v)


def _schur_constants(a: np.ndarray, rho: float, sec: float, mode: str) -> JordanConstants:
    n = len(a)
    proj = _perron_projector(a, rho)
    rem = a - rho * proj
    u, _ = schur(rem.astype(complex), output="complex")
    nil = np.linalg.norm(np.triu(u, 1), 2)
    scale = math.sqrt(n) if mode == "row" else 1.0
    pbound = proj.sum(axis=1) if mode == "row" else proj
    floor = float(pbound.min())
    if floor <= 0:
        raise HorizonError("Perron projector is not positive")
    if sec <= 1e-300:
        # nilpotent remainder: R^t vanishes for t >= n
        rn = np.linalg.norm(rem, 2) / rho
        c = float(np.abs(pbound).max()) + scale * max((rn**t for t in range(1, n)), default=0.0)
        return JordanConstants(c, 0.5 * floor, n, False, rho, mode)
    kappa = scale * sum((nil / sec) ** k for k in range(n))
    ratio = sec / rho
    power = n - 1
    if power:
        t_peak = max(1.0, power / -math.log(ratio))
        peak = max(t**power * ratio**t for t in (math.floor(t_peak), math.ceil(t_peak), 1) if t >= 1)
    else:
        peak = ratio
    c = float(np.abs(pbound).max()) + kappa * peak
    m = _first_below(kappa, ratio, 0.5 * floor, power)
    return JordanConstants(c, 0.5 * floor, m, False, rho, mode)


def solve_horizon(ratio: float, n: int, c: float, c_tilde: float, m: int) -> int:
    """Smallest ``E >= m`` with ``t^n ratio^t < c_tilde / c`` for every ``t >= E``.

    The left side rises until ``t = n / ln(1/ratio)`` and falls after it, so
    the search starts at that peak.
    """
    if not 0.0 < ratio < 1.0:
        raise HorizonError("the rate ratio must lie strictly between 0 and 1")
    log_r = math.log(ratio)
    target = math.log(c_tilde / c)
    f = lambda t: n * math.log(t) + t * log_r - target
    lo = max(m, 1, math.ceil(n / -log_r))
    if f(lo) < 0:
        return lo
    hi = lo
    while f(hi) >= 0:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if f(mid) < 0:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class HorizonCertificate:
    sigma: StationaryStrategy
    sigma2: StationaryStrategy
    lambda2_pair: tuple[float, float]
    c: float
    c_tilde: float
    m: int
    T: int
    diagonalizable: bool
    mode: str = "entry"
    verification: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "sigma": self.sigma.to_json(),
            "sigma2": self.sigma2.to_json(),
            "lambda2_pair": list(self.lambda2_pair),
            "c": self.c,
            "c_tilde": self.c_tilde,
            "m": self.m,
            "T": self.T,
            "diagonalizable": self.diagonalizable,
            "mode": self.mode,
            "verification": self.verification,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "HorizonCertificate":
        return cls(
            StationaryStrategy.from_json(doc["sigma"]),
            StationaryStrategy.from_json(doc["sigma2"]),
            tuple(doc["lambda2_pair"]),
            float(doc["c"]),
            float(doc["c_tilde"]),
            int(doc["m"]),
            int(doc["T"]),
            bool(doc["diagonalizable"]),
            doc.get("mode", "entry"),
            doc.get("verification", {}),
        )


def _scaled_survival(a: np.ndarray, rho: float, first: int, count: int) -> np.ndarray:
    """Row sums of ``(a / rho)^e`` for ``e = first .. first + count - 1``; shape ``(count, n)``."""
    b = a / rho
    x = np.linalg.matrix_power(b, first)
    out = np.empty((count, len(a)))
    for k in range(count):
        out[k] = x.sum(axis=1)
        x = x @ b
    return out


def certified_horizon(
    mdp: Mdp,
    sigma: StationaryStrategy,
    sigma2: StationaryStrategy,
    initial: str | None = None,
    span: int = VERIFY_SPAN,
) -> HorizonCertificate:
    """Certificate that ``sigma``'s curve beats ``sigma2``'s at every period ``t >= T``.

    ``sigma`` must have the better absorption rate (smaller for Reach, larger
    for Safety).  The certificate is only issued after the dominance has been
    checked on ``[T, T + span]`` from every initial state both restricted
    matrices cover.
    """
    initial = initial or default_initial(mdp)
    lam = (lambda2(mdp, sigma, initial), lambda2(mdp, sigma2, initial))
    if abs(lam[0] - lam[1]) <= TIE_TOL:
        raise HorizonError(f"absorption rates tie ({lam[0]!r}, {lam[1]!r}); nothing to certify")
    reach = mdp.objective is Objective.REACH
    if (lam[0] > lam[1]) if reach else (lam[0] < lam[1]):
        raise HorizonError("sigma must have the better absorption rate")
    red = (strategy_reduced(mdp, sigma, initial), strategy_reduced(mdp, sigma2, initial))
    fast, slow = (red[0], red[1]) if lam[0] < lam[1] else (red[1], red[0])
    mode = "entry" if all(np.all(r.matrix > 0) for r in red) else "row"
    upper = jordan_constants(fast, mode)
    lower = jordan_constants(slow, mode)
    ratio = min(lam) / max(lam)
    exponent = solve_horizon(ratio, mdp.n, upper.c, lower.c_tilde, lower.m)
    T = exponent + 1
    cert = HorizonCertificate(
        sigma, sigma2, lam, upper.c, lower.c_tilde, lower.m, T,
        upper.diagonalizable and lower.diagonalizable, mode,
    )
    scope = [s for s in fast.states if s in slow.states]
    rho = max(lam)
    f = _scaled_survival(fast.matrix, rho, T - 1, span + 1)[:, [fast.states.index(s) for s in scope]]
    g = _scaled_survival(slow.matrix, rho, T - 1, span + 1)[:, [slow.states.index(s) for s in scope]]
    bad = np.argwhere(~(f < g))
    margin = float(((g - f) / g).min())
    verification = {
        "window": [T, T + span],
        "states": scope,
        "min_relative_margin": margin,
        "passed": not len(bad),
    }
    cert = HorizonCertificate(**{**cert.__dict__, "verification": verification})
    if len(bad):
        k, j = bad[0]
        raise HorizonError(
            f"dominance fails at period {T + int(k)} from state {scope[j]!r}",
            certificate=cert,
            period=T + int(k),
        )
    return cert


def empirical_crossover(
    curve_a: ReachCurve, curve_b: ReachCurve, objective: Objective | str = Objective.REACH
) -> int | None:
    """Smallest ``T0`` from which A is strictly better than B through the last period."""
    if curve_a.initial != curve_b.initial or curve_a.horizon != curve_b.horizon:
        raise ValueError("curves need the same initial state and horizon")
    d = advantage(curve_a, curve_b, objective, 1, curve_a.horizon)
    bad = np.flatnonzero(~(d > 0))
    if len(bad) == 0:
        return 1
    if bad[-1] == len(d) - 1:
        return None
    return int(bad[-1]) + 2
