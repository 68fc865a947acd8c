import math

import numpy as np
import pytest
from scipy.special import logsumexp

from survkit.errors import FitError, ValidationError
from survkit.mtlr import (
    MTLRModel,
    TimeGrid,
    WeightMatrix,
    admissible_start,
    fit_mtlr,
    make_time_grid,
    mtlr_loglik,
    risk_score_mtlr,
    risk_scores_mtlr,
    sequence_probabilities,
    survival_curve_mtlr,
    survival_curves,
    weight_matrix,
)
from survkit.synth import table1_replica

from conftest import make_dataset, random_survival


def legal_sequences(m):
    """All monotone 0/1 vectors of length m, ordered by position of the first 1."""
    return [np.array([0] * k + [1] * (m - k)) for k in range(m + 1)]


def loglik_oracle(theta, bias, X, times, status, tau, reg_c):
    """Enumerates outcome vectors explicitly and keeps those consistent with each subject."""
    m = len(tau)
    seqs = legal_sequences(m)
    total = 0.0
    for x, t, d in zip(X, times, status):
        a = theta @ x + bias
        scores = np.array([y @ a for y in seqs])
        # y_j = 1 means the event happened by tau_j
        if d == 1:
            ok = [all((y[j] == 1) == (t <= tau[j]) for j in range(m)) for y in seqs]
        else:
            ok = [all(y[j] == 0 for j in range(m) if tau[j] <= t) for y in seqs]
        total += logsumexp(scores[ok]) - logsumexp(scores)
    diffs = np.diff(theta, axis=0)
    return total - 0.5 * reg_c * (np.sum(diffs ** 2) + np.sum(theta[0] ** 2))


def zero_model(m, p):
    return MTLRModel(TimeGrid(tuple(range(10, 10 * m + 1, 10))), np.zeros((m, p)), np.zeros(m), 1.0,
                     tuple(f"x{k}" for k in range(p)))


def test_grid_three_points():
    ds = make_dataset([10, 20, 30, 40], [1, 1, 1, 0], [[0.0]] * 4)
    assert make_time_grid(ds, 3).boundaries == (10.0, 20.0, 30.0)


def test_grid_shrinks_to_distinct():
    ds = make_dataset([5, 5, 9, 9], [1, 1, 1, 1], [[0.0]] * 4)
    grid = make_time_grid(ds, 10)
    assert grid.boundaries == (5.0, 9.0)


def test_grid_on_replica():
    grid = make_time_grid(table1_replica(), 5)
    b = np.array(grid.boundaries)
    assert grid.m == 5
    assert np.all(np.diff(b) > 0)
    assert b[0] > 10 and b[-1] <= 108


def test_grid_no_events():
    with pytest.raises(FitError):
        make_time_grid(make_dataset([3, 4], [0, 0], [[0.0], [1.0]]), 2)


def test_grid_rejects_bad_boundaries():
    with pytest.raises(ValidationError):
        TimeGrid((3.0, 3.0))
    with pytest.raises(ValidationError):
        TimeGrid(())


def test_admissible_start_conventions():
    grid = TimeGrid((10.0, 20.0, 30.0))
    # event exactly on a boundary falls in the interval that boundary closes
    k = admissible_start(grid, [10, 15, 35, 10, 15, 35], [1, 1, 1, 0, 0, 0])
    np.testing.assert_array_equal(k, [0, 1, 3, 1, 1, 3])


def test_zero_params_uniform():
    rng = np.random.default_rng(0)
    ds = random_survival(rng, 15, 2, max_time=50)
    grid = make_time_grid(ds, 4)
    m = grid.m
    value, _ = mtlr_loglik(np.zeros((m, 2)), np.zeros(m), ds, grid, 1.0)
    k0 = admissible_start(grid, ds.times, ds.status)
    expected = sum(-math.log(m + 1) if d else math.log((m + 1 - k) / (m + 1)) for k, d in zip(k0, ds.status))
    assert value == pytest.approx(expected, abs=1e-12)


def test_censored_beyond_last_boundary():
    grid = TimeGrid((10.0, 20.0))
    ds = make_dataset([25], [0], [[0.3]])
    value, _ = mtlr_loglik(np.zeros((2, 1)), np.zeros(2), ds, grid, 1.0)
    assert value == pytest.approx(-math.log(3), abs=1e-15)


def test_matches_enumeration_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        ds = random_survival(rng, 8, 2, max_time=30)
        grid = TimeGrid(tuple(np.sort(rng.choice(np.arange(1, 31), size=3, replace=False)).astype(float)))
        theta = rng.normal(size=(3, 2))
        bias = rng.normal(size=3)
        value, _ = mtlr_loglik(theta, bias, ds, grid, 0.7)
        ref = loglik_oracle(theta, bias, ds.covariates(), ds.times, ds.status, grid.boundaries, 0.7)
        assert value == pytest.approx(ref, abs=1e-10)


def test_gradient_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(20):
        ds = random_survival(rng, 10, 1, max_time=30)
        grid = make_time_grid(ds, 2)
        m = grid.m
        theta = rng.normal(size=(m, 1))
        bias = rng.normal(size=m)
        _, (gt, gb) = mtlr_loglik(theta, bias, ds, grid, 1.3)
        flat = np.concatenate([theta.ravel(), bias])

        def f(v):
            return mtlr_loglik(v[:m].reshape(m, 1), v[m:], ds, grid, 1.3)[0]

        fd = np.array([(f(flat + h * e) - f(flat - h * e)) / (2 * h) for e in np.eye(len(flat))])
        g = np.concatenate([gt.ravel(), gb])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-3)


def test_parameter_shape_checked():
    ds = make_dataset([1, 2], [1, 1], [[0.0], [1.0]])
    with pytest.raises(ValidationError):
        mtlr_loglik(np.zeros((2, 2)), np.zeros(2), ds, TimeGrid((1.0, 2.0)), 1.0)


def test_probabilities_normalised():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m, p = int(rng.integers(1, 8)), int(rng.integers(1, 4))
        model = MTLRModel(TimeGrid(tuple(range(1, m + 1))), rng.normal(scale=3, size=(m, p)),
                          rng.normal(size=m), 1.0, ())
        P = sequence_probabilities(model, rng.normal(size=(5, p)))
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_zero_model_survival_exact():
    for m in (1, 2, 5, 9):
        S = survival_curve_mtlr(zero_model(m, 2), np.array([0.4, -2.0]))
        expected = np.array([(m + 1 - j) / (m + 1) for j in range(1, m + 1)])
        assert np.max(np.abs(S - expected)) <= 2 * np.finfo(float).eps


def test_single_boundary_half():
    model = MTLRModel(TimeGrid((5.0,)), np.array([[2.0]]), np.array([-1.0]), 1.0, ("x",))
    assert survival_curve_mtlr(model, np.array([0.5]))[0] == pytest.approx(0.5, abs=1e-15)


def test_zero_model_constant_score():
    model = zero_model(4, 3)
    scores = risk_scores_mtlr(model, np.random.default_rng(4).normal(size=(6, 3)))
    assert np.ptp(scores) == 0


def test_lower_curve_higher_risk():
    model = MTLRModel(TimeGrid((5.0, 10.0)), np.array([[1.0], [1.0]]), np.zeros(2), 1.0, ("x",))
    lo_x, hi_x = np.array([-1.0]), np.array([1.0])
    assert np.all(survival_curve_mtlr(model, hi_x) < survival_curve_mtlr(model, lo_x))
    assert risk_score_mtlr(model, hi_x) > risk_score_mtlr(model, lo_x)


def test_shift_invariance_of_sequence_scores():
    # a common shift of all m+1 sequence scores must leave probabilities and ranks alone
    rng = np.random.default_rng(5)
    model = MTLRModel(TimeGrid((1.0, 2.0, 3.0)), rng.normal(size=(3, 2)), rng.normal(size=3), 1.0, ())
    X = rng.normal(size=(8, 2))
    P = sequence_probabilities(model, X)
    s = np.log(P) + 17.0
    P2 = np.exp(s - logsumexp(s, axis=1, keepdims=True))
    np.testing.assert_allclose(P, P2, atol=1e-13)
    assert np.array_equal(np.argsort(risk_scores_mtlr(model, X)),
                          np.argsort(-(np.cumsum(P2[:, ::-1], axis=1)[:, ::-1][:, 1:]).sum(axis=1)))


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        survival_curve_mtlr(zero_model(2, 2), np.zeros(3))


def fitted_model(seed=6, n=60, reg_c=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    times = np.clip(np.ceil(30 * np.exp(-1.2 * X[:, 0] + rng.normal(scale=0.3, size=n))), 1, 100)
    status = (rng.uniform(size=n) < 0.8).astype(int)
    ds = make_dataset(times, status, X)
    return ds, fit_mtlr(ds, make_time_grid(ds, 6), reg_c)


def test_fit_sign_and_ascent():
    ds, model = fitted_model()
    trace = np.array(model.objective_trace)
    assert np.all(np.diff(trace) >= 0)
    assert trace[-1] > trace[0]
    wm = weight_matrix(model)
    # feature 1 drives early events: its weights are positive at the early boundaries
    assert np.all(wm.values[0, :3] > 0)


def test_fit_deterministic():
    _, a = fitted_model()
    _, b = fitted_model()
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.bias, b.bias)


def test_fit_rejects_nonpositive_c():
    ds, _ = fitted_model(n=20)
    with pytest.raises(ValidationError):
        fit_mtlr(ds, make_time_grid(ds, 3), 0.0)


def test_strong_smoothing_flattens_rows():
    _, model = fitted_model(reg_c=1e6)
    assert np.max(np.abs(np.diff(model.theta, axis=0))) < 1e-3


def test_survival_monotone_on_random_inputs():
    _, model = fitted_model()
    S = survival_curves(model, np.random.default_rng(7).normal(scale=3, size=(100, 2)))
    assert np.all(np.diff(S, axis=1) <= 1e-15)
    assert np.all((S >= 0) & (S <= 1))


def test_weight_matrix_shape_and_csv(tmp_path):
    rng = np.random.default_rng(8)
    model = MTLRModel(TimeGrid((12.0, 50.0, 111.0)), rng.normal(size=(3, 2)), rng.normal(size=3), 1.0,
                      ("Commercial_risk", "Vul_Homes"))
    wm = weight_matrix(model)
    assert wm.values.shape == (2, 3)
    assert wm.boundaries == (12.0, 50.0, 111.0)
    rows = list(wm.rows())
    assert len(rows) == 2 * 3 + 3 and rows[-1][0] == "bias"
    assert rows[1] == ("Commercial_risk", 50.0, model.theta[1, 0])
    wm.to_csv(tmp_path / "w.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "feature,boundary_time,weight"
    again = WeightMatrix.from_csv(tmp_path / "w.csv")
    assert again.features == wm.features and again.boundaries == wm.boundaries
    assert np.array_equal(again.values, wm.values) and np.array_equal(again.bias, wm.bias)


def test_artifact_round_trip():
    _, model = fitted_model(n=30)
    again = MTLRModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(again.theta, model.theta)
    assert again.grid == model.grid
