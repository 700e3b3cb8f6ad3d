"""Panel ingestion, alignment, and series cleaning.

A panel is a dense unit-by-date grid of daily observations. Input files are
long-format CSVs that may skip days or contain carryover artifacts (dips in
cumulative counts, literal zeros on days a source failed to report), so this
module handles gridding, inner joins across tables keyed by unit, per-series
repair, and derivation of age-band rates from cumulative count bands.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AllMissing,
    DuplicateCell,
    EmptyFile,
    EmptyIntersection,
    NegativeDerivedCount,
    NonPositivePopulation,
    UnparseableDate,
)

log = logging.getLogger(__name__)

DAY = dt.timedelta(days=1)


def validate_unit_code(code: str) -> str:
    """Check a unit code: non-empty, and numeric codes must be 5-digit FIPS."""
    if not code:
        raise ValueError("unit code must be non-empty")
    if code.isdigit() and len(code) != 5:
        raise ValueError(f"numeric unit code {code!r} must be a 5-digit FIPS code")
    return code


def state_of(code: str) -> str:
    """State identifier of a unit: FIPS prefix for counties, the code itself otherwise."""
    if code.isdigit() and len(code) == 5:
        return code[:2]
    return code


@dataclass(frozen=True)
class UnitMeta:
    """Per-unit attributes carried alongside the outcome grid."""

    treated: bool = False
    t0: dt.date | None = None
    cluster: str | None = None
    incentive_category: int | None = None


@dataclass(frozen=True, eq=False)
class Panel:
    """Dense daily panel: one row per unit, one column per calendar day.

    Missing observations are NaN, never zero. Dates form a contiguous daily
    grid. Instances are immutable; restriction and metadata attachment return
    new panels.
    """

    units: tuple[str, ...]
    dates: tuple[dt.date, ...]
    values: np.ndarray
    meta: Mapping[str, UnitMeta] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for code in self.units:
            validate_unit_code(code)
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit codes must be unique within a panel")
        if not self.dates:
            raise ValueError("panel must cover at least one date")
        for a, b in zip(self.dates, self.dates[1:]):
            if b - a != DAY:
                raise ValueError(f"date grid has a gap or disorder between {a} and {b}")
        if self.values.shape != (len(self.units), len(self.dates)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.units)} units x {len(self.dates)} dates"
            )
        for code, m in self.meta.items():
            if m.treated:
                if m.t0 is None:
                    raise ValueError(f"treated unit {code} has no intervention date")
                if not (self.dates[0] <= m.t0 <= self.dates[-1]):
                    raise ValueError(
                        f"intervention date {m.t0} of unit {code} is outside the panel range"
                    )

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    def unit_index(self, code: str) -> int:
        try:
            return self.units.index(code)
        except ValueError:
            raise KeyError(f"unit {code!r} not in panel") from None

    def date_index(self, day: dt.date) -> int:
        offset = (day - self.dates[0]).days
        if not (0 <= offset < len(self.dates)):
            raise KeyError(f"date {day} not in panel range")
        return offset

    def series(self, code: str) -> np.ndarray:
        return self.values[self.unit_index(code)].copy()

    def meta_for(self, code: str) -> UnitMeta:
        return self.meta.get(code, UnitMeta())

    def restrict(self, units: Sequence[str]) -> "Panel":
        """New panel containing only `units`, in the given order."""
        rows = [self.unit_index(u) for u in units]
        meta = {u: self.meta[u] for u in units if u in self.meta}
        return Panel(tuple(units), self.dates, self.values[rows].copy(), meta)

    def with_metadata(self, meta: Mapping[str, UnitMeta]) -> "Panel":
        kept = {u: m for u, m in meta.items() if u in set(self.units)}
        return Panel(self.units, self.dates, self.values, kept)

    def with_values(self, values: np.ndarray) -> "Panel":
        return Panel(self.units, self.dates, values, self.meta)


@dataclass(frozen=True, eq=False)
class PredictorTable:
    """Unit-level predictor matrix: one row per predictor, one column per unit."""

    names: tuple[str, ...]
    units: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError("predictor names must be unique")
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit codes must be unique in a predictor table")
        if self.values.shape != (len(self.names), len(self.units)):
            raise ValueError(
                f"predictor matrix shape {self.values.shape} does not match "
                f"{len(self.names)} predictors x {len(self.units)} units"
            )

    @classmethod
    def empty(cls, units: Sequence[str]) -> "PredictorTable":
        return cls((), tuple(units), np.zeros((0, len(units))))

    @property
    def n_predictors(self) -> int:
        return len(self.names)

    def unit_index(self, code: str) -> int:
        try:
            return self.units.index(code)
        except ValueError:
            raise KeyError(f"unit {code!r} not in predictor table") from None

    def column(self, code: str) -> np.ndarray:
        return self.values[:, self.unit_index(code)].copy()

    def restrict(self, units: Sequence[str]) -> "PredictorTable":
        cols = [self.unit_index(u) for u in units]
        return PredictorTable(self.names, tuple(units), self.values[:, cols].copy())


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


def _parse_date(text: str, context: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise UnparseableDate(f"cannot parse date {text!r} {context}") from None


def ingest_panel(
    path: str,
    schema: tuple[str, str, str] = ("unit", "date", "value"),
) -> Panel:
    """Read a long-format CSV into a dense daily panel.

    Args:
        path: CSV with one observation per row.
        schema: names of the unit, date, and value columns, in that order.

    The date grid spans the earliest through the latest date present in the
    file; (unit, date) cells with no row become NaN. Empty or NA-like value
    fields also become NaN. A repeated (unit, date) pair is an error even if
    the values agree, since silent aggregation would hide upstream defects.
    """
    unit_col, date_col, value_col = schema
    cells: dict[tuple[str, dt.date], float] = {}
    units_in_order: list[str] = []
    seen_units: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in schema:
            if col not in header:
                raise ValueError(f"column {col!r} not found in {path} (header: {header})")
        for row in reader:
            unit = validate_unit_code((row[unit_col] or "").strip())
            day = _parse_date(row[date_col] or "", f"for unit {unit} in {path}")
            raw = (row[value_col] or "").strip()
            if raw.lower() in _MISSING_TOKENS:
                value = np.nan
            else:
                value = float(raw)
            key = (unit, day)
            if key in cells:
                raise DuplicateCell(f"duplicate observation for unit {unit} on {day} in {path}")
            cells[key] = value
            if unit not in seen_units:
                seen_units.add(unit)
                units_in_order.append(unit)
    if not cells:
        raise EmptyFile(f"{path} contains no data rows")

    first = min(day for _, day in cells)
    last = max(day for _, day in cells)
    n_days = (last - first).days + 1
    dates = tuple(first + DAY * i for i in range(n_days))
    values = np.full((len(units_in_order), n_days), np.nan)
    index = {u: i for i, u in enumerate(units_in_order)}
    for (unit, day), value in cells.items():
        values[index[unit], (day - first).days] = value
    return Panel(tuple(units_in_order), dates, values)


def load_predictors(path: str) -> PredictorTable:
    """Read a wide CSV (unit, predictor columns...) into a PredictorTable."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if not header or header[0] != "unit":
            raise ValueError(f"{path} must start with a 'unit' column (header: {header})")
        names = tuple(header[1:])
        units: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            unit = validate_unit_code((row["unit"] or "").strip())
            if unit in set(units):
                raise DuplicateCell(f"unit {unit} listed twice in {path}")
            units.append(unit)
            rows.append([float(row[name]) for name in names])
    if not units:
        raise EmptyFile(f"{path} contains no data rows")
    values = np.array(rows, dtype=float).T if names else np.zeros((0, len(units)))
    return PredictorTable(names, tuple(units), values)


_TRUTHY = {"1", "true", "yes", "y", "t"}
_FALSY = {"", "0", "false", "no", "n", "f"}


def load_metadata(path: str) -> dict[str, UnitMeta]:
    """Read per-unit metadata: unit, treated, t0, cluster, incentive_category."""
    meta: dict[str, UnitMeta] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "unit" not in header or "treated" not in header:
            raise ValueError(f"{path} must carry 'unit' and 'treated' columns")
        for row in reader:
            unit = validate_unit_code((row["unit"] or "").strip())
            if unit in meta:
                raise DuplicateCell(f"unit {unit} listed twice in {path}")
            flag = (row["treated"] or "").strip().lower()
            if flag in _TRUTHY:
                treated = True
            elif flag in _FALSY:
                treated = False
            else:
                raise ValueError(f"unreadable treated flag {row['treated']!r} for unit {unit}")
            t0_raw = (row.get("t0") or "").strip()
            t0 = _parse_date(t0_raw, f"for unit {unit} in {path}") if t0_raw else None
            cluster = (row.get("cluster") or "").strip() or None
            cat_raw = (row.get("incentive_category") or "").strip()
            category: int | None = None
            if cat_raw:
                category = int(cat_raw)
                if category not in (0, 1, 2, 3):
                    raise ValueError(
                        f"incentive_category must be 0..3, got {category} for unit {unit}"
                    )
            meta[unit] = UnitMeta(treated=treated, t0=t0, cluster=cluster,
                                  incentive_category=category)
    if not meta:
        raise EmptyFile(f"{path} contains no data rows")
    return meta


# ---------------------------------------------------------------------------
# joins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JoinResult:
    """Units shared by every table plus the ids that fell out of the join."""

    units: tuple[str, ...]
    dropped: tuple[str, ...]


def _units_of(table: object) -> list[str]:
    units = getattr(table, "units", table)
    return list(units)  # type: ignore[arg-type]


def join_on_key(tables: Sequence[object]) -> JoinResult:
    """Inner-join unit id sets across tables.

    Accepts anything exposing a `units` attribute (Panel, PredictorTable) or
    a plain iterable of unit codes. Kept units preserve the first table's
    order; dropped ids are reported sorted so reconciliation against source
    row counts is reproducible.
    """
    if not tables:
        raise ValueError("join_on_key needs at least one table")
    unit_lists = [_units_of(t) for t in tables]
    common = set(unit_lists[0])
    for units in unit_lists[1:]:
        common &= set(units)
    if not common:
        raise EmptyIntersection("no unit appears in every table")
    kept = tuple(u for u in unit_lists[0] if u in common)
    dropped = tuple(sorted({u for units in unit_lists for u in units} - common))
    return JoinResult(kept, dropped)


# ---------------------------------------------------------------------------
# cleaning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CleaningPolicy:
    """Knobs for per-series repair.

    max_bad_fraction: tolerated share of missing-or-zero cells after the
        series' first positive value; above it the series is dropped.
    window: trailing rolling-mean width in days.
    repair_mode: 'interpolate' fills bad cells linearly, 'cumulative_max'
        enforces a running maximum, 'both' interpolates then enforces.
    """

    max_bad_fraction: float = 0.10
    window: int = 7
    repair_mode: str = "interpolate"

    def __post_init__(self) -> None:
        if not (0.0 <= self.max_bad_fraction <= 1.0):
            raise ValueError("max_bad_fraction must lie in [0, 1]")
        if self.window < 1:
            raise ValueError("window must be at least 1 day")
        if self.repair_mode not in ("interpolate", "cumulative_max", "both"):
            raise ValueError(f"unknown repair_mode {self.repair_mode!r}")


@dataclass(frozen=True)
class CleanResult:
    """Outcome of cleaning one series: either a repaired series or a drop verdict."""

    series: np.ndarray | None
    dropped: bool
    reason: str | None
    bad_fraction: float
    n_repaired: int


def _bad_mask(series: np.ndarray) -> tuple[np.ndarray, float]:
    """Cells needing repair, and the drop fraction measured after the first positive.

    A cell is bad if it is missing, or if it is a literal zero occurring after
    the series' first positive value (a cumulative count cannot fall back to
    zero, so such cells are reporting failures, not data). Leading zeros are
    genuine. The drop fraction is the share of bad cells among the cells
    strictly after the first positive one.
    """
    missing = ~np.isfinite(series)
    positive = np.isfinite(series) & (series > 0)
    bad = missing.copy()
    fraction = 0.0
    if positive.any():
        first_pos = int(np.argmax(positive))
        after = np.zeros_like(bad)
        after[first_pos + 1:] = True
        zero_after = after & np.isfinite(series) & (series == 0)
        bad |= zero_after
        n_after = int(after.sum())
        if n_after > 0:
            fraction = float((bad & after).sum()) / n_after
    return bad, fraction


def repair_series(series: np.ndarray, policy: CleaningPolicy) -> np.ndarray:
    """Fill bad cells per the policy's repair mode, without smoothing."""
    x = np.asarray(series, dtype=float).copy()
    bad, _ = _bad_mask(x)
    mode = policy.repair_mode
    if mode in ("interpolate", "both"):
        good = ~bad
        if not good.any():
            raise AllMissing("series has no usable cell to interpolate from")
        idx = np.arange(x.size)
        x[bad] = np.interp(idx[bad], idx[good], x[good])
    if mode in ("cumulative_max", "both"):
        x = enforce_monotone(x)
        if not np.isfinite(x).all():
            # leading missing cells survive a running max; extend the first
            # repaired value backwards so downstream smoothing stays finite
            finite = np.isfinite(x)
            if not finite.any():
                raise AllMissing("series has no usable cell")
            x[~finite] = x[finite][0]
    return x


def rolling_mean(series: np.ndarray, window: int) -> np.ndarray:
    """Trailing rolling mean: out[t] averages the last `window` days up to t.

    The first window-1 positions average the available prefix, so output
    length equals input length and every output value is a convex combination
    of inputs.
    """
    x = np.asarray(series, dtype=float)
    if window == 1:
        return x.copy()
    csum = np.concatenate([[0.0], np.cumsum(x)])
    t = np.arange(x.size)
    start = np.maximum(t - window + 1, 0)
    return (csum[t + 1] - csum[start]) / (t + 1 - start)


def clean_series(series: np.ndarray, policy: CleaningPolicy) -> CleanResult:
    """Repair one series or rule it unusable.

    Raises AllMissing when the series has no valid cell at all. Otherwise the
    drop rule runs first: if the bad fraction after the first positive value
    strictly exceeds policy.max_bad_fraction the series is dropped unrepaired.
    Surviving series are repaired and smoothed with the trailing window.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0 or not np.isfinite(x).any():
        raise AllMissing("series has no valid cell")
    bad, fraction = _bad_mask(x)
    if fraction > policy.max_bad_fraction:
        return CleanResult(None, True, f"bad fraction {fraction:.4f} exceeds "
                           f"{policy.max_bad_fraction:.4f}", fraction, 0)
    repaired = repair_series(x, policy)
    smoothed = rolling_mean(repaired, policy.window)
    return CleanResult(smoothed, False, None, fraction, int(bad.sum()))


def clean_panel(panel: Panel, policy: CleaningPolicy) -> tuple[Panel, list[tuple[str, str]]]:
    """Clean every unit's series; drop failing units and report why."""
    kept_units: list[str] = []
    kept_rows: list[np.ndarray] = []
    report: list[tuple[str, str]] = []
    for unit in panel.units:
        row = panel.values[panel.unit_index(unit)]
        try:
            result = clean_series(row, policy)
        except AllMissing:
            report.append((unit, "all cells missing"))
            continue
        if result.dropped:
            report.append((unit, result.reason or "dropped"))
            continue
        kept_units.append(unit)
        kept_rows.append(result.series)
    if not kept_units:
        raise EmptyIntersection("cleaning dropped every unit")
    for unit, reason in report:
        log.info("dropped unit %s: %s", unit, reason)
    meta = {u: panel.meta[u] for u in kept_units if u in panel.meta}
    return Panel(tuple(kept_units), panel.dates, np.array(kept_rows), meta), report


def enforce_monotone(series: np.ndarray) -> np.ndarray:
    """Running maximum: output[t] = max(input[0..t]).

    Missing cells inherit the running maximum so far; leading missing cells
    stay missing.
    """
    return np.fmax.accumulate(np.asarray(series, dtype=float))


# ---------------------------------------------------------------------------
# age-band rates
# ---------------------------------------------------------------------------

BANDS = (12, 18, 65)


@dataclass(frozen=True)
class AgeBandData:
    """Cumulative vaccination counts per age band and census denominators.

    counts maps scheme name ('first_dose' or 'complete') to a mapping from
    band lower bound (12, 18, 65 meaning that-age-and-up) to the count
    series. pops maps the same band bounds to census population sizes.
    """

    counts: Mapping[str, Mapping[int, np.ndarray]]
    pops: Mapping[int, float]


def age_band_rate(
    data: AgeBandData,
    lb: int,
    ub: int | None,
    scheme: str,
) -> np.ndarray:
    """Percent of the lb-to-ub population vaccinated, derived by band subtraction.

    Only 12+, 18+, and 65+ cumulative counts exist upstream, so a bounded band
    like 18 to 64 is count(18+) minus count(65+) over pop(18+) minus pop(65+).
    Each band is repaired with a running maximum before subtracting so a
    carryover glitch in one band cannot leak into the derived band.
    """
    if lb not in BANDS:
        raise ValueError(f"lower bound must be one of {BANDS}, got {lb}")
    if ub is not None and (ub not in (18, 65) or ub <= lb):
        raise ValueError(f"upper bound must exceed the lower bound, got lb={lb} ub={ub}")
    if scheme not in data.counts:
        raise ValueError(f"unknown scheme {scheme!r}; have {sorted(data.counts)}")

    def band(bound: int) -> np.ndarray:
        series = np.asarray(data.counts[scheme][bound], dtype=float)
        repaired = enforce_monotone(series)
        finite = np.isfinite(repaired)
        if not finite.any():
            raise AllMissing(f"band {bound}+ has no valid cell")
        # cumulative counts start from zero before the first report
        repaired[~finite] = 0.0
        return repaired

    def pop(bound: int) -> float:
        value = float(data.pops[bound])
        if value <= 0:
            raise NonPositivePopulation(f"population for band {bound}+ is {value}")
        return value

    count = band(lb)
    denom = pop(lb)
    if ub is not None:
        count = count - band(ub)
        denom = denom - pop(ub)
        if denom <= 0:
            raise NonPositivePopulation(
                f"derived population for band {lb}-{ub - 1} is {denom}"
            )
        if (count < 0).any():
            t = int(np.argmax(count < 0))
            raise NegativeDerivedCount(
                f"band {lb}-{ub - 1} count is negative at position {t} even after repair"
            )
    return 100.0 * count / denom
