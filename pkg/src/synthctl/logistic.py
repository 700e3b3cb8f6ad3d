"""Logistic growth curves for vaccination uptake trajectories.

Each unit's cumulative uptake series is summarized by three parameters: the
ceiling K (saturation percentage), the growth rate nu, and the starting level
p0. Cross-unit summaries then classify units into quadrants around the mean
ceiling and rate, regress parameters on vulnerability indices, and bin units
into equal-count compartments of an index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize

from .errors import DegenerateSeries, TooFewUnits, ZeroVariance

K_CEILING = 120.0
NU_FLOOR = 1e-6  # below this the curve is flat and K is unidentifiable


def logistic_predict(K: float, nu: float, p0: float, t: np.ndarray) -> np.ndarray:
    """Logistic curve value at times t.

    Evaluated as K / (1 + ((K - p0)/p0) * exp(-nu t)), which matches the
    K p0 e^(nu t) / (K + p0 (e^(nu t) - 1)) form but never overflows for
    large nu*t.
    """
    if K <= 0 or p0 <= 0:
        raise ValueError("K and p0 must be positive")
    if nu < 0:
        raise ValueError("growth rate must be nonnegative")
    t = np.asarray(t, dtype=float)
    return K / (1.0 + ((K - p0) / p0) * np.exp(-nu * t))


@dataclass(frozen=True)
class LogisticFit:
    K: float
    nu: float
    p0: float
    sse: float
    flagged: bool
    note: str | None = None


def _expit(a: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.asarray(a, dtype=float)))


def fit_logistic(
    series: np.ndarray,
    t: np.ndarray | None = None,
    *,
    seed: int = 42,
    n_starts: int = 10,
) -> LogisticFit:
    """Least-squares logistic fit by seeded multistart Nelder-Mead.

    The ceiling is constrained to (max(series), 120], the rate to nu >= 0,
    and the start level to p0 > 0 through a smooth reparameterization, so the
    simplex search itself is unconstrained. A rate that collapses below 1e-6
    means the series is flat and the ceiling cannot be identified; the fit is
    returned flagged rather than guessed at.

    Raises DegenerateSeries for series with fewer than 10 usable points or no
    strictly positive value.
    """
    y = np.asarray(series, dtype=float)
    tt = np.arange(y.size, dtype=float) if t is None else np.asarray(t, dtype=float)
    if tt.shape != y.shape:
        raise ValueError(f"time axis shape {tt.shape} does not match series {y.shape}")
    keep = np.isfinite(y)
    y, tt = y[keep], tt[keep]
    if y.size < 10:
        raise DegenerateSeries(f"need at least 10 usable points, have {y.size}")
    if not (y > 0).any():
        raise DegenerateSeries("series is never positive")

    k_min = float(y.max())
    if k_min >= K_CEILING:
        raise ValueError(f"series maximum {k_min} exceeds the ceiling {K_CEILING}")

    def unpack(theta: np.ndarray) -> tuple[float, float, float]:
        K = k_min + (K_CEILING - k_min) * float(_expit(theta[0]))
        nu = float(np.exp(theta[1]))
        p0 = float(np.exp(theta[2]))
        return K, nu, p0

    def sse(theta: np.ndarray) -> float:
        K, nu, p0 = unpack(theta)
        resid = y - logistic_predict(K, nu, p0, tt)
        return float(np.dot(resid, resid))

    # data-driven anchors: start level near the first positive value, rate
    # from the average log-growth between the first and last positive points
    positive = y > 0
    first_pos = float(y[positive][0])
    t_first, t_last = float(tt[positive][0]), float(tt[positive][-1])
    y_last = float(y[positive][-1])
    if y_last > first_pos and t_last > t_first:
        nu_hat = float(np.clip(np.log(y_last / first_pos) / (t_last - t_first), 1e-4, 1.0))
    else:
        nu_hat = 0.05
    anchor = np.array([0.0, np.log(nu_hat), np.log(first_pos)])

    rng = np.random.default_rng(seed)
    starts = [anchor]
    starts.extend(anchor + rng.normal(0.0, np.array([2.0, 1.0, 1.0]))
                  for _ in range(n_starts - 1))

    nm_options = {"maxiter": 3000, "maxfev": 4000, "xatol": 1e-10, "fatol": 1e-14}
    best_theta, best_sse = None, np.inf
    for theta0 in starts:
        res = scipy.optimize.minimize(sse, theta0, method="Nelder-Mead", options=nm_options)
        if res.fun < best_sse:
            best_theta, best_sse = res.x, float(res.fun)
    # a second descent from the winner lets the shrunken simplex re-expand
    res = scipy.optimize.minimize(sse, best_theta, method="Nelder-Mead", options=nm_options)
    if res.fun < best_sse:
        best_theta, best_sse = res.x, float(res.fun)

    K, nu, p0 = unpack(np.asarray(best_theta))
    pred = logistic_predict(K, nu, p0, tt)
    movement = float(pred.max() - pred.min())
    if movement < 1e-6 * max(1.0, K):
        # flat solution family: nu ~ 0 (any K) and p0 ~ K (any nu) both fit a
        # constant series equally well, so no single rate or ceiling is
        # identified; report the family's canonical zero-rate member
        nu = 0.0
        resid = y - logistic_predict(K, nu, p0, tt)
        best_sse = float(np.dot(resid, resid))
        flagged = True
        note = "series shows no growth; rate and ceiling unidentifiable"
    else:
        flagged = nu < NU_FLOOR
        note = "rate is effectively zero, ceiling unidentifiable" if flagged else None
    return LogisticFit(K=K, nu=nu, p0=p0, sse=best_sse, flagged=flagged, note=note)


QUADRANTS = ("HiK_HiV", "HiK_LoV", "LoK_HiV", "LoK_LoV")


def classify_quadrant(fits: Mapping[str, LogisticFit]) -> dict[str, str]:
    """Label each unit by its position against the cross-unit mean K and nu.

    A parameter at or above the mean counts as Hi, so a unit sitting exactly
    on a threshold lands in the Hi cell.
    """
    if len(fits) < 2:
        raise ValueError("need at least two units to classify")
    ks = np.array([f.K for f in fits.values()])
    nus = np.array([f.nu for f in fits.values()])
    k_mean, nu_mean = float(ks.mean()), float(nus.mean())
    labels = {}
    for unit, f in fits.items():
        k_part = "HiK" if f.K >= k_mean else "LoK"
        v_part = "HiV" if f.nu >= nu_mean else "LoV"
        labels[unit] = f"{k_part}_{v_part}"
    return labels


@dataclass(frozen=True)
class RegressionLine:
    slope: float
    corr: float


def theme_regression(theme: np.ndarray, param: np.ndarray) -> RegressionLine:
    """Least-squares slope of a fitted parameter on an index, plus Pearson r."""
    x = np.asarray(theme, dtype=float)
    y = np.asarray(param, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("theme and parameter must be 1-d arrays of equal length")
    if x.size < 3:
        raise ValueError(f"need at least 3 units, have {x.size}")
    vx = float(x.var())
    vy = float(y.var())
    if vx == 0.0:
        raise ZeroVariance("index values are constant")
    if vy == 0.0:
        raise ZeroVariance("parameter values are constant")
    cov = float(np.mean((x - x.mean()) * (y - y.mean())))
    return RegressionLine(slope=cov / vx, corr=cov / np.sqrt(vx * vy))


@dataclass(frozen=True)
class BinStat:
    bin: int
    count: int
    mean: float
    std: float


def decile_summary(
    param: Sequence[float],
    index: Sequence[float],
    bins: int = 10,
) -> tuple[BinStat, ...]:
    """Equal-count bins of units ranked by an index, summarizing a parameter.

    Units sort ascending by index (stable, so ties keep input order). When the
    count does not divide evenly, the leftover units go one apiece to the
    lowest bins, so bin sizes are as equal as possible and deterministic.
    Mean and population standard deviation are reported per bin.
    """
    y = np.asarray(param, dtype=float)
    x = np.asarray(index, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise ValueError("param and index must be 1-d arrays of equal length")
    if bins < 1:
        raise ValueError("bins must be positive")
    n = y.size
    if n < bins:
        raise TooFewUnits(f"cannot form {bins} bins from {n} units")
    order = np.argsort(x, kind="stable")
    base, rem = divmod(n, bins)
    sizes = [base + 1] * rem + [base] * (bins - rem)
    out = []
    at = 0
    for b, size in enumerate(sizes, start=1):
        chunk = y[order[at:at + size]]
        at += size
        out.append(BinStat(bin=b, count=size, mean=float(chunk.mean()),
                           std=float(chunk.std())))
    return tuple(out)
