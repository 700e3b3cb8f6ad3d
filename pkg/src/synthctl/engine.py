"""Synthetic control fitting: nested importance and donor weight search.

Fitting runs in four steps. The pre-intervention span splits into a training
and a validation window. For a candidate importance vector v, donor weights
w(v) are fit on training-window predictors. The importance vector is chosen
to minimize the validation-window outcome error. Final weights are then re-fit
with the winning importance vector and the synthetic series is the weighted
donor combination over the whole panel.

Predictором matrices get one extra row beyond the unit-level predictors: each
unit's mean outcome over the training window, so the match is anchored to
pre-intervention levels even when no predictor table is supplied. Predictor
rows are z-scored across units by default so importance weights live on one
scale; pass standardize=False to keep raw rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.optimize

from .errors import EmptyWindow, InvalidSplit, ZeroVariancePredictor
from .panel import Panel, PredictorTable
from .seeding import derive_seed
from .weights import Regularization, SolveResult, SolverOptions, solve_w, sparsify_and_resolve

OUTCOME_MEAN_NAME = "outcome_training_mean"

V_MODES = ("optimized", "inverse_variance", "fixed")
PLACEMENTS = ("head", "tail")

# search budget for the importance vector: improvements smaller than this over
# a 50-evaluation stretch end the search
_V_STALL_TOL = 1e-10
_V_STALL_EVALS = 50


@dataclass(frozen=True)
class StudySpec:
    """What to fit: the treated unit, its donor pool, and the time layout.

    T0 counts pre-intervention days, so panel column T0 is the first
    post-intervention day. t_fit training days are carved out of the
    pre-period at the head or tail; the remainder is the validation window.
    """

    treated: str
    donors: tuple[str, ...]
    T0: int
    t_fit: int = 10
    v_mode: str = "optimized"
    v_fixed: np.ndarray | None = None
    reg: Regularization = field(default_factory=Regularization)
    train_placement: str = "tail"
    sparsify: bool = False

    def __post_init__(self) -> None:
        if not self.donors:
            raise ValueError("donor pool must be non-empty")
        if len(set(self.donors)) != len(self.donors):
            raise ValueError("donor pool contains duplicates")
        if self.treated in self.donors:
            raise ValueError("treated unit cannot be its own donor")
        if self.v_mode not in V_MODES:
            raise ValueError(f"v_mode must be one of {V_MODES}, got {self.v_mode!r}")
        if self.v_mode == "fixed" and self.v_fixed is None:
            raise ValueError("v_mode 'fixed' needs v_fixed")
        if self.train_placement not in PLACEMENTS:
            raise ValueError(f"train_placement must be one of {PLACEMENTS}")
        split_pre_period(self.T0, self.t_fit, self.train_placement)  # validates


@dataclass(frozen=True)
class SynthResult:
    """A fitted synthetic control and its error summary."""

    treated: str
    donors: tuple[str, ...]
    predictor_names: tuple[str, ...]
    w_star: np.ndarray
    v_star: np.ndarray
    synthetic: np.ndarray
    gap: np.ndarray
    train_mspe: float
    validation_mspe: float
    pre_mspe: float
    objective: float

    @property
    def weights_by_donor(self) -> dict[str, float]:
        return {d: float(w) for d, w in zip(self.donors, self.w_star)}

    @property
    def importance_by_predictor(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.predictor_names, self.v_star)}


def split_pre_period(T0: int, t_fit: int, placement: str = "tail") -> tuple[range, range]:
    """Carve the pre-period [0, T0) into training and validation windows.

    head places the t_fit training days first; tail places them last, keeping
    the match anchored to the days closest to the intervention.
    """
    if not (1 <= t_fit < T0):
        raise InvalidSplit(f"need 1 <= t_fit < T0, got t_fit={t_fit} T0={T0}")
    if placement == "head":
        return range(0, t_fit), range(t_fit, T0)
    if placement == "tail":
        return range(T0 - t_fit, T0), range(0, T0 - t_fit)
    raise ValueError(f"unknown placement {placement!r}")


def mspe(actual: np.ndarray, synthetic: np.ndarray, window: Sequence[int]) -> float:
    """Sum of squared prediction errors over the window (a sum, not a mean)."""
    idx = np.asarray(list(window), dtype=int)
    if idx.size == 0:
        raise EmptyWindow("window selects no observations")
    actual = np.asarray(actual, dtype=float)
    synthetic = np.asarray(synthetic, dtype=float)
    if actual.shape != synthetic.shape:
        raise ValueError(f"series lengths differ: {actual.shape} vs {synthetic.shape}")
    if idx.min() < 0 or idx.max() >= actual.size:
        raise ValueError("window extends outside the series")
    diff = actual[idx] - synthetic[idx]
    return float(np.dot(diff, diff))


def inverse_variance_v(X: np.ndarray) -> np.ndarray:
    """Importance proportional to 1/variance of each predictor across units."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"need a predictors-by-units matrix, got shape {X.shape}")
    var = X.var(axis=1)
    if (var == 0).any():
        name = int(np.argmax(var == 0))
        raise ZeroVariancePredictor(f"predictor row {name} is constant across units")
    inv = 1.0 / var
    return inv / inv.sum()


@dataclass(frozen=True)
class Design:
    """Predictor matrices for one study: treated column, donor block, raw copy."""

    X1: np.ndarray
    X0: np.ndarray
    raw: np.ndarray  # unstandardized (k+1) x (1 + J), treated first
    names: tuple[str, ...]


def build_design(
    panel: Panel,
    predictors: PredictorTable | None,
    spec: StudySpec,
    standardize: bool = True,
) -> Design:
    """Assemble the predictor matrices for a study.

    Rows are the predictor table rows plus the appended training-window
    outcome mean. Standardization z-scores each row across the treated unit
    and donors together; constant rows become zeros.
    """
    train, _ = split_pre_period(spec.T0, spec.t_fit, spec.train_placement)
    order = (spec.treated,) + spec.donors
    t_idx = np.asarray(train, dtype=int)

    if predictors is not None and predictors.n_predictors > 0:
        if OUTCOME_MEAN_NAME in predictors.names:
            raise ValueError(f"predictor name {OUTCOME_MEAN_NAME!r} is reserved")
        cols = [predictors.column(u) for u in order]
        base = np.column_stack(cols)
        names = predictors.names
    else:
        base = np.zeros((0, len(order)))
        names = ()

    outcome_rows = np.stack([panel.series(u) for u in order])
    if not np.isfinite(outcome_rows).all():
        raise ValueError("outcome series contain missing values; clean the panel first")
    mean_row = outcome_rows[:, t_idx].mean(axis=1)
    raw = np.vstack([base, mean_row[None, :]])
    names = names + (OUTCOME_MEAN_NAME,)

    if standardize:
        mu = raw.mean(axis=1, keepdims=True)
        sd = raw.std(axis=1, keepdims=True)
        scaled = np.where(sd > 0, (raw - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    else:
        scaled = raw
    return Design(X1=scaled[:, 0].copy(), X0=scaled[:, 1:].copy(), raw=raw, names=names)


def _validate_against_panel(spec: StudySpec, panel: Panel) -> None:
    panel.unit_index(spec.treated)
    for d in spec.donors:
        panel.unit_index(d)
    if not (spec.t_fit < spec.T0 <= panel.n_dates):
        raise InvalidSplit(
            f"pre-period T0={spec.T0} does not fit a panel of {panel.n_dates} days"
        )


def _outcome_block(panel: Panel, spec: StudySpec) -> tuple[np.ndarray, np.ndarray]:
    Y1 = panel.series(spec.treated)
    Y0 = np.stack([panel.series(d) for d in spec.donors])
    return Y1, Y0


def evaluate_v(
    spec: StudySpec,
    panel: Panel,
    predictors: PredictorTable | None,
    v: np.ndarray,
    seed: int = 42,
    opts: SolverOptions | None = None,
    standardize: bool = True,
) -> float:
    """Validation-window outcome error of the weights implied by importance v."""
    opts = opts or SolverOptions()
    _validate_against_panel(spec, panel)
    design = build_design(panel, predictors, spec, standardize)
    _, val = split_pre_period(spec.T0, spec.t_fit, spec.train_placement)
    Y1, Y0 = _outcome_block(panel, spec)
    v = _normalize_v(np.asarray(v, dtype=float), design.raw.shape[0])
    res = solve_w(design.X1, design.X0, v, spec.reg, opts, seed=seed)
    return mspe(Y1, Y0.T @ res.w, val)


def _normalize_v(v: np.ndarray, k: int) -> np.ndarray:
    if v.shape != (k,):
        raise ValueError(f"importance vector has shape {v.shape}, expected ({k},)")
    if (v < 0).any():
        raise ValueError("importance weights must be nonnegative")
    total = float(v.sum())
    if total <= 0:
        raise ValueError("importance weights must not all be zero")
    return v / total


def _softmax(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max()
    e = np.exp(z)
    return e / e.sum()


class _SearchStalled(Exception):
    pass


def solve_v(
    spec: StudySpec,
    panel: Panel,
    predictors: PredictorTable | None = None,
    *,
    seed: int = 42,
    opts: SolverOptions | None = None,
    standardize: bool = True,
) -> np.ndarray:
    """Choose the predictor importance vector according to spec.v_mode.

    fixed passes the supplied vector through (normalized); inverse_variance
    weights each predictor by 1/variance across units of its raw values.
    optimized runs a derivative-free search over softmax-parameterized
    importance vectors, scoring each candidate by the validation-window error
    of its implied donor weights. The search phase uses warm-started
    single-restart solves for speed; the uniform vector, the
    inverse-variance vector, and the search winner are then re-scored at the
    full solver budget with the run seed, and the best re-scored candidate
    wins. The returned vector therefore never validates worse than either
    baseline.
    """
    opts = opts or SolverOptions()
    _validate_against_panel(spec, panel)
    design = build_design(panel, predictors, spec, standardize)
    k = design.raw.shape[0]

    if spec.v_mode == "fixed":
        assert spec.v_fixed is not None
        return _normalize_v(np.asarray(spec.v_fixed, dtype=float), k)
    if spec.v_mode == "inverse_variance":
        return inverse_variance_v(design.raw)

    if k == 1:
        return np.array([1.0])

    _, val = split_pre_period(spec.T0, spec.t_fit, spec.train_placement)
    Y1, Y0 = _outcome_block(panel, spec)
    val_idx = np.asarray(val, dtype=int)
    Y1_val = Y1[val_idx]
    Y0_val = Y0[:, val_idx]

    def val_error(w: np.ndarray) -> float:
        diff = Y1_val - Y0_val.T @ w
        return float(np.dot(diff, diff))

    uniform = np.full(k, 1.0 / k)
    try:
        invvar: np.ndarray | None = inverse_variance_v(design.raw)
    except ZeroVariancePredictor:
        invvar = None

    cheap_opts = SolverOptions(max_iters=400, tol=1e-7, restarts=1,
                               constraint_mode=opts.constraint_mode)
    cheap_seed = derive_seed(seed, "v-search")
    warm: list[np.ndarray | None] = [None]

    best_f = np.inf
    best_v: np.ndarray | None = None
    since_improve = 0

    def scored(theta: np.ndarray) -> float:
        nonlocal best_f, best_v, since_improve
        v = _softmax(np.asarray(theta, dtype=float))
        res = solve_w(design.X1, design.X0, v, spec.reg, cheap_opts,
                      seed=cheap_seed, init=warm[0])
        warm[0] = res.w
        f = val_error(res.w)
        if f < best_f - _V_STALL_TOL:
            best_f, best_v, since_improve = f, v, 0
        else:
            since_improve += 1
            if since_improve >= _V_STALL_EVALS:
                raise _SearchStalled
        return f

    starts = [np.zeros(k)]
    if invvar is not None:
        starts.append(np.log(invvar))
    else:
        starts.append(np.random.default_rng(derive_seed(seed, "v-start")).normal(size=k))

    maxfev = max(60, 4 * k)
    for theta0 in starts:
        since_improve = 0
        try:
            scipy.optimize.minimize(
                scored, theta0, method="Nelder-Mead",
                options={"maxfev": maxfev, "xatol": 1e-3, "fatol": _V_STALL_TOL},
            )
        except _SearchStalled:
            pass

    candidates = [uniform]
    if invvar is not None:
        candidates.append(invvar)
    if best_v is not None:
        candidates.append(best_v)

    def full_score(v: np.ndarray) -> float:
        res = solve_w(design.X1, design.X0, v, spec.reg, opts, seed=seed)
        return val_error(res.w)

    scores = [full_score(v) for v in candidates]
    return candidates[int(np.argmin(scores))]


def fit_synth(
    spec: StudySpec,
    panel: Panel,
    predictors: PredictorTable | None = None,
    *,
    seed: int = 42,
    opts: SolverOptions | None = None,
    standardize: bool = True,
) -> SynthResult:
    """Fit a synthetic control for the study and score it.

    Returns the donor weights, the importance vector that chose them, the
    synthetic series over the whole panel, the per-day gap (actual minus
    synthetic), and summed squared errors over the training, validation, and
    full pre-intervention windows.
    """
    opts = opts or SolverOptions()
    _validate_against_panel(spec, panel)
    design = build_design(panel, predictors, spec, standardize)
    train, val = split_pre_period(spec.T0, spec.t_fit, spec.train_placement)

    v = solve_v(spec, panel, predictors, seed=seed, opts=opts, standardize=standardize)
    result: SolveResult = solve_w(design.X1, design.X0, v, spec.reg, opts, seed=seed)
    if spec.sparsify:
        result = sparsify_and_resolve(result.w, design.X1, design.X0, v,
                                      spec.reg, opts, seed=seed)

    Y1, Y0 = _outcome_block(panel, spec)
    synthetic = Y0.T @ result.w
    gap = Y1 - synthetic
    return SynthResult(
        treated=spec.treated,
        donors=spec.donors,
        predictor_names=design.names,
        w_star=result.w,
        v_star=v,
        synthetic=synthetic,
        gap=gap,
        train_mspe=mspe(Y1, synthetic, train),
        validation_mspe=mspe(Y1, synthetic, val),
        pre_mspe=mspe(Y1, synthetic, range(spec.T0)),
        objective=result.objective,
    )
