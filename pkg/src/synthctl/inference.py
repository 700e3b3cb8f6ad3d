"""Placebo-based inference for synthetic control fits.

Every donor is refit as if it were treated, against the remaining donors.
Ranking the treated unit's post-to-pre error ratio within that ensemble gives
a permutation p-value: the share of units whose ratio strictly exceeds the
treated one, out of all units fit.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
from dataclasses import dataclass

import numpy as np

from .engine import StudySpec, fit_synth
from .errors import EmptyWindow, SynthctlError, ZeroPreRMSE
from .panel import Panel, PredictorTable
from .seeding import derive_seed
from .weights import SolverOptions

# pre-period error below this is treated as an exact fit; the ratio is taken
# against the floor instead of erroring so placebo loops keep running
PRE_RMSE_FLOOR = 1e-12


def rmse_window(actual: np.ndarray, synthetic: np.ndarray, t1: int, t2: int) -> float:
    """Root mean squared gap over the inclusive index window [t1, t2]."""
    actual = np.asarray(actual, dtype=float)
    synthetic = np.asarray(synthetic, dtype=float)
    if actual.shape != synthetic.shape:
        raise ValueError(f"series lengths differ: {actual.shape} vs {synthetic.shape}")
    if t1 > t2:
        raise EmptyWindow(f"window [{t1}, {t2}] is empty")
    if t1 < 0 or t2 >= actual.size:
        raise ValueError(f"window [{t1}, {t2}] extends outside the series")
    diff = actual[t1:t2 + 1] - synthetic[t1:t2 + 1]
    return float(np.sqrt(np.mean(diff * diff)))


def post_pre_ratio(r_post: float, r_pre: float) -> float:
    """Post-period error over pre-period error."""
    if r_pre == 0.0:
        raise ZeroPreRMSE("pre-period RMSE is exactly zero; the ratio diverges")
    return r_post / r_pre


@dataclass(frozen=True)
class PlaceboEntry:
    unit: str
    r: float
    R_pre: float
    R_post: float
    skipped: bool
    reason: str | None = None
    pre_floored: bool = False


@dataclass(frozen=True)
class PlaceboEnsemble:
    """Ratios for the treated unit and every donor refit as a placebo."""

    treated: str
    entries: tuple[PlaceboEntry, ...]
    treated_index: int
    T0: int


def _fit_ratio_task(payload: tuple) -> PlaceboEntry:
    spec, panel, predictors, seed, opts, standardize, T0 = payload
    try:
        result = fit_synth(spec, panel, predictors, seed=seed, opts=opts,
                           standardize=standardize)
    except (SynthctlError, ValueError) as exc:
        return PlaceboEntry(spec.treated, float("nan"), float("nan"), float("nan"),
                            skipped=True, reason=str(exc))
    actual = panel.series(spec.treated)
    T = actual.size
    R_pre = rmse_window(actual, result.synthetic, 0, T0 - 1)
    R_post = rmse_window(actual, result.synthetic, T0, T - 1)
    floored = R_pre < PRE_RMSE_FLOOR
    r = R_post / max(R_pre, PRE_RMSE_FLOOR)
    return PlaceboEntry(spec.treated, r, R_pre, R_post, skipped=False,
                        pre_floored=floored)


def placebo_run(
    spec: StudySpec,
    panel: Panel,
    predictors: PredictorTable | None = None,
    *,
    seed: int = 42,
    jobs: int = 1,
    placebo_T0: int | None = None,
    opts: SolverOptions | None = None,
    standardize: bool = True,
) -> PlaceboEnsemble:
    """Fit the treated unit and every donor-as-placebo, collecting ratios.

    Each placebo inherits the treated unit's intervention index unless
    placebo_T0 overrides it, and is fit against the other donors only; the
    truly treated unit never enters any placebo's pool. Per-unit seeds are
    hashed from the base seed and the unit code, and entries are ordered by
    unit code, so output is identical for any job count.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if spec.T0 >= panel.n_dates:
        raise ValueError(f"T0={spec.T0} leaves no post-period in a {panel.n_dates}-day panel")

    tasks: list[tuple] = []
    entries: list[PlaceboEntry] = []
    for unit in (spec.treated,) + spec.donors:
        if unit == spec.treated:
            sub_spec, T0 = spec, spec.T0
        else:
            T0 = placebo_T0 if placebo_T0 is not None else spec.T0
            pool = tuple(d for d in spec.donors if d != unit)
            try:
                sub_spec = dataclasses.replace(spec, treated=unit, donors=pool, T0=T0)
            except (SynthctlError, ValueError) as exc:
                entries.append(PlaceboEntry(unit, float("nan"), float("nan"),
                                            float("nan"), skipped=True, reason=str(exc)))
                continue
        tasks.append((sub_spec, panel, predictors, derive_seed(seed, "placebo", unit),
                      opts, standardize, T0))

    if jobs == 1 or len(tasks) <= 1:
        entries.extend(_fit_ratio_task(t) for t in tasks)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            entries.extend(pool.map(_fit_ratio_task, tasks))

    entries.sort(key=lambda e: e.unit)
    ordered = tuple(entries)
    treated_index = next(i for i, e in enumerate(ordered) if e.unit == spec.treated)
    return PlaceboEnsemble(spec.treated, ordered, treated_index, spec.T0)


def p_value(ensemble: PlaceboEnsemble) -> float:
    """Share of fitted units whose ratio strictly exceeds the treated one.

    Skipped units are excluded from numerator and denominator; the treated
    unit itself counts in the denominator, so with J clean placebos the
    p-value is a multiple of 1/(J+1) and a perfectly extreme treated unit
    gets exactly zero.
    """
    treated_entry = ensemble.entries[ensemble.treated_index]
    if treated_entry.skipped:
        raise ValueError(f"treated unit {ensemble.treated} has no fit; no p-value exists")
    valid = [e for e in ensemble.entries if not e.skipped]
    exceed = sum(1 for e in valid if e.r > treated_entry.r)
    return exceed / len(valid)


@dataclass(frozen=True)
class SweepRow:
    t_fit: int
    pre_deviation: float
    p_value: float
    failed: bool = False
    reason: str | None = None


def training_sweep(
    spec: StudySpec,
    t_fit_values: list[int],
    panel: Panel,
    predictors: PredictorTable | None = None,
    *,
    seed: int = 42,
    jobs: int = 1,
    opts: SolverOptions | None = None,
    standardize: bool = True,
) -> tuple[SweepRow, ...]:
    """Refit the study for each training-window length and tabulate quality.

    pre_deviation is the summed squared gap over the whole pre-period, so
    rows are comparable across window lengths; p_value comes from a fresh
    placebo run per row. A failing configuration yields a marked row rather
    than aborting the sweep.
    """
    rows = []
    for t_fit in sorted(set(t_fit_values)):
        try:
            sub = dataclasses.replace(spec, t_fit=t_fit)
            fit = fit_synth(sub, panel, predictors, seed=seed, opts=opts,
                            standardize=standardize)
            ensemble = placebo_run(sub, panel, predictors, seed=seed, jobs=jobs,
                                   opts=opts, standardize=standardize)
            rows.append(SweepRow(t_fit, fit.pre_mspe, p_value(ensemble)))
        except (SynthctlError, ValueError) as exc:
            rows.append(SweepRow(t_fit, float("nan"), float("nan"),
                                 failed=True, reason=str(exc)))
    return tuple(rows)
