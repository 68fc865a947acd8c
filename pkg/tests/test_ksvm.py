import math

import numpy as np
import pytest

from survkit.errors import NoComparablePairsError, ValidationError
from survkit.ksvm import (
    KSVMConfig,
    KSVMModel,
    KernelSpec,
    comparable_pairs_surv,
    fit_ksvm,
    gram,
    kernel_eval,
    primal_objective,
    score_ksvm,
    scores_ksvm,
)

from conftest import make_dataset, random_survival


def pairs_set(times, status):
    return {(int(i) + 1, int(j) + 1) for i, j in comparable_pairs_surv(times, status)}


def test_kernel_values():
    assert kernel_eval(KernelSpec("rbf", 3.0), [1.0, 2.0], [1.0, 2.0]) == 1.0
    assert kernel_eval(KernelSpec("rbf", 0.5), [0, 0], [1, 1]) == pytest.approx(math.exp(-1), abs=1e-15)
    assert kernel_eval(KernelSpec("rbf", 0.5), [0, 0], [1, 1]) == pytest.approx(0.367879, abs=1e-6)
    assert kernel_eval(KernelSpec("linear"), [1, 2], [3, 4]) == 11
    assert kernel_eval(KernelSpec("polynomial", degree=2, coef0=1.0), [1, 2], [3, 4]) == 144


def test_kernel_dimension_mismatch():
    with pytest.raises(ValidationError):
        kernel_eval(KernelSpec("linear"), [1, 2], [1, 2, 3])


@pytest.mark.parametrize("kw", [{"kind": "sigmoid"}, {"kind": "rbf", "gamma": 0.0},
                                {"kind": "polynomial", "degree": 0}])
def test_kernel_spec_validation(kw):
    with pytest.raises(ValidationError):
        KernelSpec(**kw)


def test_kernel_symmetry():
    rng = np.random.default_rng(0)
    specs = [KernelSpec("linear"), KernelSpec("polynomial", degree=3, coef0=0.5), KernelSpec("rbf", 0.7)]
    for _ in range(1000):
        x, y = rng.normal(size=3), rng.normal(size=3)
        for s in specs:
            a, b = kernel_eval(s, x, y), kernel_eval(s, y, x)
            if s.kind == "rbf":
                assert abs(a - b) < 1e-15
            else:
                assert a == b


def test_gram_matches_pointwise_and_psd():
    rng = np.random.default_rng(1)
    for _ in range(50):
        A = rng.normal(size=(8, 3))
        spec = KernelSpec("rbf", float(rng.uniform(0.1, 2)))
        K = gram(spec, A, A)
        ref = np.array([[kernel_eval(spec, a, b) for b in A] for a in A])
        np.testing.assert_allclose(K, ref, atol=1e-14)
        assert np.linalg.eigvalsh(K).min() >= -1e-10


def test_default_gamma():
    assert KernelSpec().resolved(4).gamma == 0.25


def test_comparable_pairs():
    assert pairs_set([2, 4], [1, 1]) == {(1, 2)}
    assert pairs_set([2, 4], [0, 1]) == set()
    assert pairs_set([2, 4, 5], [1, 0, 1]) == {(1, 2), (1, 3)}
    assert pairs_set([3, 3], [1, 1]) == set()


def test_comparable_pairs_by_definition():
    rng = np.random.default_rng(2)
    for _ in range(100):
        ds = random_survival(rng, 9, 1, max_time=6)
        t, d = ds.times, ds.status
        expected = {(i + 1, j + 1) for i in range(9) for j in range(9) if t[i] < t[j] and d[i] == 1}
        assert pairs_set(t, d) == expected


def separable(n=25):
    x = np.arange(n, dtype=float)[:, None] / n
    return make_dataset(np.arange(1, n + 1), np.ones(n, dtype=int), x)


def test_separable_linear_ranking():
    ds = separable()
    model = fit_ksvm(ds, KernelSpec("linear"), reg_c=100.0, config=KSVMConfig(epochs=5000))
    f = scores_ksvm(model, ds.covariates())
    pairs = comparable_pairs_surv(ds.times, ds.status)
    margins = f[pairs[:, 0]] - f[pairs[:, 1]]
    assert np.all(margins > 0)
    assert np.all(margins >= 1 - 1e-6)
    assert np.all(np.diff(f) < 0)


def test_objective_decreases():
    rng = np.random.default_rng(3)
    ds = random_survival(rng, 30, 2, max_time=40)
    model = fit_ksvm(ds, KernelSpec("rbf", 0.5), config=KSVMConfig(epochs=50))
    trace = model.objective_trace
    assert trace[-1] <= trace[0]
    # dual ascent does not make the primal monotone; it may wobble slightly
    assert trace[-1] <= min(trace) * 1.01


def test_reaches_qp_optimum():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(4)
    for seed in range(3):
        ds = random_survival(rng, 14, 2, max_time=30)
        spec = KernelSpec("rbf", 0.5)
        model = fit_ksvm(ds, spec, reg_c=2.0, config=KSVMConfig(epochs=3000, seed=seed))
        K = gram(spec, ds.covariates(), ds.covariates())
        pairs = comparable_pairs_surv(ds.times, ds.status)
        L = np.linalg.cholesky(K + 1e-12 * np.eye(len(K)))
        a = cp.Variable(len(K))
        f = K @ a
        obj = 0.5 * cp.sum_squares(L.T @ a) + 2.0 * cp.sum(cp.pos(1 - (f[pairs[:, 0]] - f[pairs[:, 1]])))
        best = cp.Problem(cp.Minimize(obj)).solve()
        ours = primal_objective(model.alphas, K, pairs, 2.0)
        assert ours <= best * (1 + 1e-5) + 1e-6


def test_deterministic():
    rng = np.random.default_rng(5)
    ds = random_survival(rng, 25, 2)
    a = fit_ksvm(ds, config=KSVMConfig(epochs=20, seed=3))
    b = fit_ksvm(ds, config=KSVMConfig(epochs=20, seed=3))
    assert np.array_equal(a.alphas, b.alphas)


def test_no_pairs():
    ds = make_dataset([1, 2, 3], [0, 0, 0], [[0.0], [1.0], [2.0]])
    with pytest.raises(NoComparablePairsError, match="no comparable pairs; all censored or degenerate"):
        fit_ksvm(ds)


def test_rejects_bad_c():
    with pytest.raises(ValidationError):
        fit_ksvm(separable(), reg_c=0.0)


def test_score_expansions():
    rows = np.array([[1.0, 2.0], [0.0, -1.0]])
    empty = KSVMModel(np.zeros(2), 0.7, rows, KernelSpec("linear"), 1.0)
    assert score_ksvm(empty, [5.0, 5.0]) == 0.7
    one = KSVMModel(np.array([1.0]), 0.0, rows[:1], KernelSpec("linear"), 1.0)
    assert score_ksvm(one, [3.0, -1.0]) == 1.0
    shifted = KSVMModel(np.array([1.0]), 4.0, rows[:1], KernelSpec("linear"), 1.0)
    X = np.random.default_rng(6).normal(size=(10, 2))
    assert np.array_equal(np.argsort(scores_ksvm(one, X)), np.argsort(scores_ksvm(shifted, X)))
    with pytest.raises(ValidationError):
        score_ksvm(one, [1.0])


def test_artifact_round_trip():
    rng = np.random.default_rng(7)
    ds = random_survival(rng, 20, 3)
    model = fit_ksvm(ds, KernelSpec("polynomial", degree=2), config=KSVMConfig(epochs=30))
    again = KSVMModel.from_dict(model.to_dict())
    X = rng.normal(size=(5, 3))
    assert np.array_equal(scores_ksvm(again, X), scores_ksvm(model, X))
