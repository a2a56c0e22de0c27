import numpy as np
import pytest

from cpscreen.errors import ConvergenceError, InvalidInputError
from cpscreen.kernels import FeatureVector, KernelSpec
from cpscreen.svr import (
    LabelledDataset,
    SvrModel,
    SvrParams,
    _duality_gap,
    _kkt_violations,
    grid_search,
    linear_weights,
    model_inner,
    model_norm,
    predict,
    predict_batch,
    train_svr,
)

LINEAR = KernelSpec.linear()


def dense_dataset(rng, m, d, w=None, noise=0.0):
    x = rng.standard_normal((m, d))
    if w is None:
        w = rng.standard_normal(d)
    y = x @ w + noise * rng.standard_normal(m)
    inputs = tuple(FeatureVector.from_dense(r) for r in x)
    return LabelledDataset(inputs, y), x, w


def test_all_labels_inside_tube_gives_zero_model():
    rng = np.random.default_rng(0)
    ds, _, _ = dense_dataset(rng, 30, 3)
    ds = LabelledDataset(ds.inputs, np.full(30, 0.05))
    model = train_svr(ds, SvrParams(c=1.0, epsilon=0.1, kernel=LINEAR))
    assert model.coefficients.size == 0
    assert predict(model, ds.inputs[0]) == 0.0


def test_noise_free_linear_target_recovered():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((50, 3))
    y = 2.0 * x[:, 0]
    ds = LabelledDataset(tuple(FeatureVector.from_dense(r) for r in x), y)
    params = SvrParams(c=1000.0, epsilon=0.01, kernel=LINEAR, tol=1e-8,
                       max_passes=100_000)
    model = train_svr(ds, params)
    pred = predict_batch(model, ds.inputs)
    assert np.abs(pred - y).max() <= 0.01 + 1e-6
    # the analytic target at a held-out point
    probe = FeatureVector.from_dense([3.0, 0.0, 0.0])
    assert predict(model, probe) == pytest.approx(6.0, abs=0.02)


def test_single_point_dual_closed_form():
    x = FeatureVector.from_dense([2.0, 0.0])
    for c, y0 in ((10.0, 3.0), (0.25, 3.0)):
        ds = LabelledDataset((x,), np.array([y0]))
        model = train_svr(ds, SvrParams(c=c, epsilon=0.5, kernel=LINEAR, tol=1e-8))
        expected = min(c, (y0 - 0.5) / 4.0)
        assert model.coefficients[0] == pytest.approx(expected, abs=1e-6)


def test_dual_feasibility_and_kkt_on_random_datasets():
    rng = np.random.default_rng(2)
    for trial in range(50):
        m = int(rng.integers(2, 30))
        d = int(rng.integers(1, 6))
        ds, x, _ = dense_dataset(rng, m, d, noise=0.5)
        c = float(rng.choice([0.1, 1.0, 10.0]))
        eps = float(rng.choice([0.01, 0.1, 0.5]))
        tol = 1e-5
        model = train_svr(ds, SvrParams(c=c, epsilon=eps, kernel=LINEAR, tol=tol,
                                        max_passes=50_000))
        assert np.all(np.abs(model.coefficients) <= c + 1e-12)
        # reconstruct the full coefficient vector to check KKT
        pi = np.zeros(m)
        for coef, sx in zip(model.coefficients, model.support_inputs):
            for i, xin in enumerate(ds.inputs):
                if xin == sx:
                    pi[i] = coef
                    break
        k = x @ x.T
        viol = _kkt_violations(pi, ds.labels - k @ pi, c, eps)
        assert viol.max(initial=0.0) <= tol * (1 + 1e-9)
        gap, primal = _duality_gap(pi, k @ pi, ds.labels, c, eps)
        assert gap <= tol * (1 + abs(primal)) + 1e-12


def test_non_convergence_raises_with_gap():
    rng = np.random.default_rng(3)
    ds, _, _ = dense_dataset(rng, 40, 2, noise=1.0)
    with pytest.raises(ConvergenceError) as err:
        train_svr(ds, SvrParams(c=100.0, epsilon=0.001, kernel=LINEAR,
                                tol=1e-12, max_passes=2))
    assert np.isfinite(err.value.gap)
    assert err.value.gap > 0


def test_predict_zero_and_single_coefficient():
    x0 = FeatureVector.from_dense([1.0, 2.0])
    model = SvrModel(np.array([1.0]), (x0,), LINEAR)
    assert predict(model, FeatureVector.from_dense([3.0, 4.0])) == pytest.approx(11.0)
    empty = SvrModel(np.zeros(0), (), LINEAR)
    assert predict(empty, x0) == 0.0


def test_predict_dimension_mismatch():
    model = SvrModel(np.array([1.0]), (FeatureVector.from_dense([1.0, 2.0]),), LINEAR)
    with pytest.raises(InvalidInputError):
        predict(model, FeatureVector.from_dense([1.0, 2.0, 3.0]))


def test_predict_batch_matches_predict():
    rng = np.random.default_rng(4)
    ds, _, _ = dense_dataset(rng, 20, 3, noise=0.3)
    model = train_svr(ds, SvrParams(c=1.0, epsilon=0.1, kernel=LINEAR))
    batch = predict_batch(model, ds.inputs)
    for i, x in enumerate(ds.inputs):
        assert batch[i] == pytest.approx(predict(model, x), abs=1e-12)


def weight_model(w):
    """Linear-kernel model equivalent to an explicit weight vector."""
    d = len(w)
    basis = [FeatureVector.from_dense(np.eye(d)[j]) for j in range(d)]
    return SvrModel(np.asarray(w, dtype=float), tuple(basis), LINEAR)


def test_model_inner_orthogonal_weights():
    a = weight_model([1.0, 0.0])
    b = weight_model([0.0, 1.0])
    assert model_inner(a, b) == pytest.approx(0.0)


def test_model_inner_zero_model():
    a = weight_model([1.0, 2.0])
    zero = SvrModel(np.zeros(0), (), LINEAR)
    assert model_inner(a, zero) == 0.0
    assert model_inner(a, a) >= 0.0


def test_model_inner_kernel_mismatch():
    a = weight_model([1.0, 0.0])
    b = SvrModel(np.array([1.0]), (FeatureVector.from_dense([1.0, 0.0]),),
                 KernelSpec.rbf(1.0))
    with pytest.raises(InvalidInputError):
        model_inner(a, b)


def test_model_norm_euclidean():
    assert model_norm(weight_model([3.0, 4.0])) == pytest.approx(5.0)
    assert model_norm(SvrModel(np.zeros(0), (), LINEAR)) == 0.0


def test_model_norm_squared_is_self_inner():
    rng = np.random.default_rng(5)
    ds, _, _ = dense_dataset(rng, 15, 3, noise=0.2)
    model = train_svr(ds, SvrParams(c=1.0, epsilon=0.1, kernel=LINEAR))
    assert model_norm(model) ** 2 == pytest.approx(model_inner(model, model), abs=1e-10)


def test_model_inner_is_bilinear_on_shared_support():
    rng = np.random.default_rng(6)
    xs = tuple(FeatureVector.from_dense(r) for r in rng.standard_normal((8, 3)))
    pa = rng.standard_normal(8)
    pb = rng.standard_normal(8)
    pc = rng.standard_normal(8)
    ma, mb, mc = (SvrModel(p, xs, LINEAR) for p in (pa, pb, pc))
    mab = SvrModel(pa + pb, xs, LINEAR)
    assert model_inner(mab, mc) == pytest.approx(
        model_inner(ma, mc) + model_inner(mb, mc), rel=1e-10
    )


def test_linear_weight_view_consistent_with_predict():
    rng = np.random.default_rng(7)
    ds, x, _ = dense_dataset(rng, 25, 4, noise=0.4)
    model = train_svr(ds, SvrParams(c=2.0, epsilon=0.05, kernel=LINEAR))
    w = linear_weights(model)
    for i in range(10):
        probe = FeatureVector.from_dense(x[i])
        assert predict(model, probe) == pytest.approx(float(w @ x[i]), abs=1e-10)


def test_linear_weights_sparse_support():
    model = SvrModel(
        np.array([2.0, -1.0]),
        (FeatureVector.from_indices([0, 2]), FeatureVector.from_indices([2])),
        LINEAR,
    )
    assert np.allclose(linear_weights(model), [2.0, 0.0, 1.0])


def test_grid_search_single_candidate():
    rng = np.random.default_rng(8)
    ds, _, _ = dense_dataset(rng, 12, 2, noise=0.1)
    params = grid_search(ds, [0.7], [0.05], LINEAR, folds=3, seed=0)
    assert params.c == 0.7
    assert params.epsilon == 0.05
    assert params.kernel == LINEAR


def test_grid_search_prefers_small_epsilon_on_clean_data():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((30, 2))
    y = x @ np.array([2.0, -1.0])
    ds = LabelledDataset(tuple(FeatureVector.from_dense(r) for r in x), y)
    params = grid_search(ds, [1000.0], [0.001, 10.0], LINEAR, folds=3, seed=1)
    assert params.epsilon == 0.001


def test_grid_search_deterministic():
    rng = np.random.default_rng(10)
    ds, _, _ = dense_dataset(rng, 20, 3, noise=0.5)
    grids = ([0.5, 2.0], [0.1, 0.01])
    a = grid_search(ds, *grids, LINEAR, folds=3, seed=42)
    b = grid_search(ds, *grids, LINEAR, folds=3, seed=42)
    assert (a.c, a.epsilon) == (b.c, b.epsilon)


def test_grid_search_rejects_bad_folds():
    rng = np.random.default_rng(11)
    ds, _, _ = dense_dataset(rng, 5, 2)
    with pytest.raises(InvalidInputError):
        grid_search(ds, [1.0], [0.1], LINEAR, folds=6, seed=0)
    with pytest.raises(InvalidInputError):
        grid_search(ds, [1.0], [0.1], LINEAR, folds=1, seed=0)
    with pytest.raises(InvalidInputError):
        grid_search(ds, [], [0.1], LINEAR, folds=2, seed=0)


def test_dataset_validation():
    x = (FeatureVector.from_dense([1.0]),)
    with pytest.raises(InvalidInputError):
        LabelledDataset(x, np.array([np.nan]))
    with pytest.raises(InvalidInputError):
        LabelledDataset(x, np.array([1.0, 2.0]))
    with pytest.raises(InvalidInputError):
        LabelledDataset((), np.array([]))


def test_params_validation():
    with pytest.raises(InvalidInputError):
        SvrParams(c=0.0, epsilon=0.1, kernel=LINEAR)
    with pytest.raises(InvalidInputError):
        SvrParams(c=1.0, epsilon=-0.1, kernel=LINEAR)
    with pytest.raises(InvalidInputError):
        SvrParams(c=1.0, epsilon=0.1, kernel=LINEAR, tol=0.0)


def test_training_with_constant_augmented_kernel_absorbs_bias():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((40, 2))
    y = x @ np.array([1.0, -2.0]) + 5.0  # constant offset
    ds = LabelledDataset(tuple(FeatureVector.from_dense(r) for r in x), y)
    aug = KernelSpec.constant_augmented(LINEAR, 1.0)
    model = train_svr(ds, SvrParams(c=1000.0, epsilon=0.01, kernel=aug, tol=1e-6,
                                    max_passes=50_000))
    pred = predict_batch(model, ds.inputs)
    assert np.abs(pred - y).max() <= 0.01 + 1e-4
