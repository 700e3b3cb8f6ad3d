"""Weight solver tests: hand oracles, a grid-search oracle, and invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import grid_simplex_3
from synthctl import (
    Regularization,
    SolverOptions,
    objective,
    project_simplex,
    solve_w,
    sparsify_and_resolve,
    sparsify_weights,
)
from synthctl.errors import DimensionMismatch

TIGHT = SolverOptions(max_iters=5000, tol=1e-14, restarts=8)


# ---------------------------------------------------------------------------
# objective: hand values
# ---------------------------------------------------------------------------

def test_objective_hand_value_with_penalties():
    # discrepancy 0, ||w||_2 = 1/sqrt(2), ||w||_1 = 1
    w = np.array([0.5, 0.5])
    X1 = np.array([0.0])
    X0 = np.array([[1.0, -1.0]])
    v = np.array([1.0])
    val = objective(w, X1, X0, v, Regularization(l1=1.0, l2=1.0))
    assert val == pytest.approx(1.0 / np.sqrt(2.0) + 1.0)


def test_objective_weighted_discrepancy():
    # residuals (1, 2), importances (1, 3) -> sqrt(1 + 12)
    w = np.array([1.0])
    X1 = np.array([1.0, 2.0])
    X0 = np.array([[0.0], [0.0]])
    v = np.array([1.0, 3.0])
    val = objective(w, X1, X0, v, Regularization(l1=0.0, l2=0.0))
    assert val == pytest.approx(np.sqrt(13.0))


def test_objective_shape_mismatch_raises():
    with pytest.raises(DimensionMismatch):
        objective(np.ones(2), np.zeros(3), np.zeros((2, 2)), np.ones(2),
                  Regularization())


# ---------------------------------------------------------------------------
# simplex projection
# ---------------------------------------------------------------------------

def test_project_simplex_hand_value():
    out = project_simplex(np.array([0.4, 0.9]))
    assert np.allclose(out, [0.25, 0.75])


def test_project_simplex_fixes_simplex_points():
    w = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(w), w)


@given(st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False),
                min_size=1, max_size=12))
def test_project_simplex_feasible_and_order_preserving(values):
    y = np.array(values)
    w = project_simplex(y)
    assert w.sum() == pytest.approx(1.0, abs=1e-9)
    assert (w >= 0).all()
    order = np.argsort(y, kind="stable")
    assert (np.diff(w[order]) >= -1e-12).all()


# ---------------------------------------------------------------------------
# solver against a grid-search oracle
# ---------------------------------------------------------------------------

def _grid_oracle(X1, X0, v, reg, grid):
    resid = X1[:, None] - X0 @ grid.T  # (k, n_grid)
    disc = np.sqrt(np.einsum("k,kn->n", v, resid ** 2))
    vals = disc + reg.l1 * np.linalg.norm(grid, axis=1) \
        + reg.l2 * np.abs(grid).sum(axis=1)
    i = int(np.argmin(vals))
    return grid[i], float(vals[i])


@pytest.mark.parametrize("case", range(10))
def test_solver_beats_grid_oracle(case):
    rng = np.random.default_rng(100 + case)
    X1 = rng.normal(size=2)
    X0 = rng.normal(size=(2, 3))
    reg = Regularization(l1=0.0, l2=0.0) if case % 2 == 0 else \
        Regularization(l1=float(rng.uniform(0, 1)), l2=float(rng.uniform(0, 0.5)))
    v = rng.uniform(0.5, 2.0, size=2)
    grid = grid_simplex_3(1e-2)
    _, oracle_val = _grid_oracle(X1, X0, v, reg, grid)
    result = solve_w(X1, X0, v, reg, TIGHT, seed=case)
    assert result.objective <= oracle_val + 1e-6


def test_solver_exact_interpolation():
    # treated is donor 2 exactly: the solver must find the vertex
    X0 = np.array([[1.0, 5.0, 9.0], [2.0, 7.0, 3.0]])
    X1 = X0[:, 1].copy()
    result = solve_w(X1, X0, np.ones(2), Regularization(0.0, 0.0), TIGHT)
    assert np.allclose(result.w, [0.0, 1.0, 0.0], atol=1e-6)
    assert result.objective <= 1e-7


def test_single_donor_shortcut():
    result = solve_w(np.array([3.0]), np.array([[8.0]]), np.ones(1),
                     Regularization(), SolverOptions(restarts=0))
    assert result.w.shape == (1,)
    assert result.w[0] == 1.0


def test_solver_trace_non_increasing():
    rng = np.random.default_rng(5)
    X1 = rng.normal(size=4)
    X0 = rng.normal(size=(4, 6))
    result = solve_w(X1, X0, np.ones(4), Regularization(), seed=1)
    trace = np.array(result.trace)
    assert (np.diff(trace) <= 1e-12).all()


def test_solver_deterministic_for_seed():
    rng = np.random.default_rng(8)
    X1 = rng.normal(size=3)
    X0 = rng.normal(size=(3, 5))
    a = solve_w(X1, X0, np.ones(3), Regularization(), seed=77)
    b = solve_w(X1, X0, np.ones(3), Regularization(), seed=77)
    assert np.array_equal(a.w, b.w)
    assert a.objective == b.objective


def test_restart_objectives_contains_winner():
    rng = np.random.default_rng(2)
    X1 = rng.normal(size=3)
    X0 = rng.normal(size=(3, 5))
    result = solve_w(X1, X0, np.ones(3), Regularization(), seed=3)
    assert min(result.restart_objectives) == pytest.approx(result.objective, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31))
def test_solver_feasibility_fuzz(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    J = int(rng.integers(1, 8))
    X1 = rng.normal(size=k) * rng.uniform(0.1, 10)
    X0 = rng.normal(size=(k, J)) * rng.uniform(0.1, 10)
    v = rng.uniform(0.1, 3.0, size=k)
    reg = Regularization(l1=float(rng.uniform(0, 2)), l2=float(rng.uniform(0, 2)))
    result = solve_w(X1, X0, v, reg, SolverOptions(max_iters=300, restarts=2),
                     seed=seed)
    assert result.w.sum() == pytest.approx(1.0, abs=1e-8)
    assert (result.w >= 0).all()


def test_l2_penalty_does_not_move_simplex_argmin():
    # on the simplex the ||w||_1 term is constant, so only the reported
    # objective shifts, not the winning weights
    rng = np.random.default_rng(21)
    X1 = rng.normal(size=3)
    X0 = rng.normal(size=(3, 4))
    v = np.ones(3)
    base = solve_w(X1, X0, v, Regularization(l1=0.0, l2=0.0), TIGHT, seed=4)
    shifted = solve_w(X1, X0, v, Regularization(l1=0.0, l2=0.7), TIGHT, seed=4)
    assert np.allclose(base.w, shifted.w, atol=1e-7)
    assert shifted.objective == pytest.approx(base.objective + 0.7, abs=1e-7)


def test_permutation_equivariance():
    rng = np.random.default_rng(31)
    k, J = 6, 4
    X1 = rng.normal(size=k)
    X0 = rng.normal(size=(k, J))
    v = rng.uniform(0.5, 2.0, size=k)
    perm = np.array([2, 0, 3, 1])
    a = solve_w(X1, X0, v, Regularization(0.0, 0.0), TIGHT, seed=11)
    b = solve_w(X1, X0[:, perm], v, Regularization(0.0, 0.0), TIGHT, seed=12)
    assert np.allclose(a.w[perm], b.w, atol=1e-5)


def test_init_point_is_honored():
    # a perfect init with no restarts must be kept, not perturbed away
    X0 = np.array([[2.0, 4.0], [1.0, 5.0]])
    w_true = np.array([0.25, 0.75])
    X1 = X0 @ w_true
    result = solve_w(X1, X0, np.ones(2), Regularization(0.0, 0.0),
                     SolverOptions(restarts=0), init=w_true)
    assert np.allclose(result.w, w_true, atol=1e-9)


# ---------------------------------------------------------------------------
# sparsification
# ---------------------------------------------------------------------------

def test_sparsify_hand_fixture():
    w = np.array([0.30, 0.25, 0.15, 0.10, 0.06, 0.05, 0.04, 0.03, 0.01, 0.01])
    new_w, mask, threshold = sparsify_weights(w)
    assert threshold == pytest.approx(0.03)
    assert mask.sum() == 2          # the two 0.01 entries, strictly below 0.03
    assert not mask[7]              # 0.03 itself survives the strict rule
    assert new_w.sum() == pytest.approx(1.0)
    assert new_w[0] == pytest.approx(0.30 / 0.98)


def test_sparsify_short_vector_passthrough():
    w = np.array([0.5, 0.3, 0.2])
    new_w, mask, threshold = sparsify_weights(w)
    assert np.array_equal(new_w, w)
    assert not mask.any()


def test_sparsify_nothing_below_threshold_passthrough():
    w = np.full(5, 0.2)
    new_w, mask, _ = sparsify_weights(w)
    assert np.array_equal(new_w, w)
    assert not mask.any()


def test_sparsify_and_resolve_zeroes_stay_zero():
    rng = np.random.default_rng(17)
    k, J = 8, 10
    X0 = rng.normal(size=(k, J))
    w_true = np.zeros(J)
    w_true[:3] = (0.5, 0.3, 0.2)
    X1 = X0 @ w_true
    first = solve_w(X1, X0, np.ones(k), Regularization(0.0, 0.0), TIGHT, seed=9)
    result = sparsify_and_resolve(first.w, X1, X0, np.ones(k),
                                  Regularization(0.0, 0.0), TIGHT, seed=9)
    _, mask, _ = sparsify_weights(first.w)
    assert (result.w[mask] == 0.0).all()
    assert result.w.sum() == pytest.approx(1.0, abs=1e-8)
    assert result.objective <= first.objective + 1e-6


@given(st.lists(st.floats(min_value=1e-4, max_value=1.0), min_size=5, max_size=20))
def test_sparsify_preserves_total_mass(raw):
    w = np.array(raw)
    w = w / w.sum()
    new_w, mask, _ = sparsify_weights(w)
    assert new_w.sum() == pytest.approx(1.0, abs=1e-9)
    assert ((new_w == 0) == mask).all() or not mask.any()
