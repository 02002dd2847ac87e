"""Mean-photon-number optimization and key-rate curves versus channel transmission."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import KeyRateResult, Observables, key_rate
from .source import make_source_stats

DEFAULT_BRACKET = (1e-8, 1e-1)
GRID_POINTS = 64
CSV_COLUMNS = ("eta", "mu_opt", "Q", "e_ph_U", "R_per_pulse", "R_bps")


def detection_rate(eta: float, mu: float) -> float:
    """Probability that exactly one photon reaches the two interior slots, ``2 eta mu e^{-2 eta mu}``."""
    if not (math.isfinite(eta) and 0.0 < eta <= 1.0):
        raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
    if not (math.isfinite(mu) and mu >= 0.0):
        raise ValueError(f"mu must be >= 0, got {mu!r}")
    x = 2.0 * eta * mu
    return x * math.exp(-x)


def eta_from_distance(length_km: float, loss_db_per_km: float = 0.5, fixed_loss_db: float = 10.0) -> float:
    """Overall transmission ``10^{-(fixed + loss * length) / 10}``.

    The defaults reproduce ``0.1 * 10^{-0.5 * length / 10}``.
    """
    if not (math.isfinite(length_km) and length_km >= 0.0):
        raise ValueError(f"length must be >= 0, got {length_km!r}")
    return 10.0 ** (-(fixed_loss_db + loss_db_per_km * length_km) / 10.0)


@dataclass(frozen=True)
class OptimizationResult:
    mu_opt: float
    result: KeyRateResult
    # R <= 0 over the whole bracket.
    flagged: bool
    # Best grid point sits on a bracket end.
    pinned: bool
    grid_mu: float
    grid_rate: float


def _rate(eta: float, e_bit: float, mu: float) -> KeyRateResult:
    obs = Observables(Q=detection_rate(eta, mu), e_bit=e_bit)
    return key_rate(obs, make_source_stats(mu), f_EC="shannon")


def optimize_mu(
    eta: float,
    e_bit: float,
    bracket: Sequence[float] = DEFAULT_BRACKET,
    tolerance: float = 1e-4,
) -> OptimizationResult:
    """Maximize the key rate over ``mu`` for fixed ``eta`` and ``e_bit``.

    A 64-point log-spaced grid locates the peak; golden-section search on
    ``log mu`` then refines it inside the neighbouring grid cells to a relative
    ``mu`` tolerance of ``tolerance``.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 < lo < hi):
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")
    log_grid = np.linspace(math.log(lo), math.log(hi), GRID_POINTS)
    results = [_rate(eta, e_bit, math.exp(u)) for u in log_grid]
    raw = np.array([r.raw_rate for r in results])
    best = int(np.argmax(raw))

    if raw[best] <= 0.0:
        return OptimizationResult(
            mu_opt=math.exp(log_grid[best]),
            result=results[best],
            flagged=True,
            pinned=best in (0, GRID_POINTS - 1),
            grid_mu=math.exp(log_grid[best]),
            grid_rate=0.0,
        )
    if best in (0, GRID_POINTS - 1):
        return OptimizationResult(
            mu_opt=math.exp(log_grid[best]),
            result=results[best],
            flagged=False,
            pinned=True,
            grid_mu=math.exp(log_grid[best]),
            grid_rate=float(raw[best]),
        )

    def neg_rate(u: float) -> float:
        return -_rate(eta, e_bit, math.exp(u)).raw_rate

    a, b, c = log_grid[best - 1], log_grid[best], log_grid[best + 1]
    # scipy's golden stops at |x3 - x0| <= tol * (|x1| + |x2|); rescale to an absolute log-tolerance.
    tol = tolerance / (2.0 * max(abs(b), 1.0))
    try:
        sol = minimize_scalar(neg_rate, bracket=(a, b, c), method="golden", tol=tol)
        u_opt = float(sol.x)
        if not (a <= u_opt <= c) or -sol.fun < raw[best]:
            u_opt = float(b)
    except ValueError:
        # Flat top: neighbours tie with the grid maximum.
        u_opt = float(b)
    mu_opt = math.exp(u_opt)
    return OptimizationResult(
        mu_opt=mu_opt,
        result=_rate(eta, e_bit, mu_opt),
        flagged=False,
        pinned=False,
        grid_mu=math.exp(b),
        grid_rate=float(raw[best]),
    )


@dataclass(frozen=True)
class CurvePoint:
    eta: float
    mu_opt: float
    Q: float
    e_ph_U: float
    R_per_pulse: float
    R_bps: float
    flagged: bool = False

    def row(self) -> tuple[float, ...]:
        return (self.eta, self.mu_opt, self.Q, self.e_ph_U, self.R_per_pulse, self.R_bps)


def _curve_point(args: tuple[float, float, float]) -> CurvePoint:
    eta, e_bit, rep_rate_hz = args
    opt = optimize_mu(eta, e_bit)
    r = opt.result
    return CurvePoint(
        eta=eta,
        mu_opt=opt.mu_opt,
        Q=r.Q,
        e_ph_U=r.e_ph_U,
        R_per_pulse=r.R,
        R_bps=r.R * rep_rate_hz,
        flagged=opt.flagged,
    )


def default_eta_grid(eta_min: float = 1e-4, eta_max: float = 1.0, points: int = 41) -> np.ndarray:
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points!r}")
    if points == 1:
        return np.array([eta_max])
    return np.logspace(math.log10(eta_min), math.log10(eta_max), points)


def keyrate_curve(
    eta_grid: Iterable[float],
    e_bit: float,
    rep_rate_hz: float = 1e9,
    workers: int = 1,
) -> list[CurvePoint]:
    """One optimized point per transmission value; ``R_bps = R_per_pulse * rep_rate_hz``."""
    etas = [float(e) for e in eta_grid]
    if any(not (0.0 < e <= 1.0) for e in etas):
        raise ValueError("eta grid values must lie in (0, 1]")
    if any(b < a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta grid must be sorted ascending")
    jobs = [(e, e_bit, rep_rate_hz) for e in etas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_curve_point, jobs))
    return [_curve_point(j) for j in jobs]


def loglog_slope(points: Sequence[CurvePoint], eta_min: float = 0.0, eta_max: float = 1.0) -> float:
    """Least-squares slope of ``log R`` against ``log eta`` over a window."""
    sel = [p for p in points if eta_min <= p.eta <= eta_max and p.R_per_pulse > 0]
    if len(sel) < 2:
        raise ValueError("need at least two positive-rate points in the window")
    x = np.log([p.eta for p in sel])
    y = np.log([p.R_per_pulse for p in sel])
    return float(np.polyfit(x, y, 1)[0])


def curve_to_csv(points: Sequence[CurvePoint], fh: Optional[io.TextIOBase] = None) -> str:
    """Render the curve with a header row and 9 significant digits."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([f"{v:.9g}" for v in p.row()])
    return buf.getvalue() if fh is None else ""
