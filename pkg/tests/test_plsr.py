"""PLSR against an independent ordinary-least-squares oracle, plus the
algebraic invariants of NIPALS."""

import numpy as np
import pytest

from tonemap_iqa import plsr
from tonemap_iqa.errors import (
    DegenerateTargetError,
    DimensionMismatchError,
    ModelFormatError,
    TooManyComponentsError,
)
from tonemap_iqa.plsr import _nipals  # noqa: SLF001 - invariant tests need scores


def ols_predict(X_tr, y_tr, X_te):
    """Independent normal-equations solver (the test oracle)."""
    Xc = X_tr - X_tr.mean(axis=0)
    yc = y_tr - y_tr.mean()
    beta = np.linalg.solve(Xc.T @ Xc, Xc.T @ yc)
    return (X_te - X_tr.mean(axis=0)) @ beta + y_tr.mean()


def well_conditioned_xy(n=50, p=10, seed=0):
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal(p)
    y = X @ beta + 0.1 * rng.standard_normal(n)
    assert np.linalg.cond(X - X.mean(axis=0)) < 100
    return X, y


def test_single_column_exact_fit():
    rng = np.random.Generator(np.random.Philox(1))
    X = rng.standard_normal((20, 1))
    y = 2.0 * X[:, 0] + 5.0
    model = plsr.fit(X, y, 1)
    pred = plsr.predict(model, X)
    assert np.abs(pred - y).max() < 1e-10
    assert abs(plsr.predict(model, np.zeros((1, 1)))[0] - 5.0) < 1e-10


def test_constant_target_rejected():
    X = np.arange(12.0).reshape(6, 2)
    with pytest.raises(DegenerateTargetError):
        plsr.fit(X, np.full(6, 3.0), 1)


def test_too_many_components_rejected():
    X, y = well_conditioned_xy(6, 4, seed=2)
    with pytest.raises(TooManyComponentsError):
        plsr.fit(X, y, 6)  # > min(N-1, p) = 4


def test_full_rank_matches_ols():
    X, y = well_conditioned_xy(seed=3)
    model = plsr.fit(X, y, 10)
    assert np.abs(plsr.predict(model, X) - ols_predict(X, y, X)).max() < 1e-6


def test_predict_at_x_mean_returns_y_mean():
    X, y = well_conditioned_xy(30, 5, seed=4)
    model = plsr.fit(X, y, 3)
    pred = plsr.predict(model, model.x_mean[None, :])
    assert abs(pred[0] - model.y_mean) < 1e-12


def test_batch_predict_equals_rowwise():
    X, y = well_conditioned_xy(40, 8, seed=5)
    model = plsr.fit(X, y, 5)
    rng = np.random.Generator(np.random.Philox(6))
    Xe = rng.standard_normal((9, 8))
    batch = plsr.predict(model, Xe)
    rows = np.array([plsr.predict(model, Xe[i : i + 1])[0] for i in range(9)])
    assert np.array_equal(batch, rows)


def test_predict_dimension_mismatch():
    X, y = well_conditioned_xy(20, 4, seed=7)
    model = plsr.fit(X, y, 2)
    with pytest.raises(DimensionMismatchError):
        plsr.predict(model, np.zeros((3, 5)))


def test_score_orthogonality_random_instances():
    for seed in range(20):
        rng = np.random.Generator(np.random.Philox(100 + seed))
        n, p = 30, 12
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        Xc = X - X.mean(axis=0)
        yc = y - y.mean()
        _, _, _, T, reached = _nipals(Xc, yc, 6)
        for i in range(reached):
            for j in range(i + 1, reached):
                cos = abs(T[:, i] @ T[:, j]) / (
                    np.linalg.norm(T[:, i]) * np.linalg.norm(T[:, j])
                )
                assert cos < 1e-8


def test_shift_equivariance():
    X, y = well_conditioned_xy(35, 9, seed=8)
    rng = np.random.Generator(np.random.Philox(9))
    Xe = rng.standard_normal((7, 9))
    for c in (-12.5, 3.25, 100.0):
        base = plsr.predict(plsr.fit(X, y, 4), Xe)
        shifted = plsr.predict(plsr.fit(X, y + c, 4), Xe)
        assert np.abs(shifted - (base + c)).max() < 1e-9


def test_column_scaling_covariance_at_prediction_level():
    # holds at full rank k = p, where the PLSR predictor coincides with
    # OLS; truncated PLS is genuinely not scale-invariant
    X, y = well_conditioned_xy(30, 6, seed=10)
    rng = np.random.Generator(np.random.Philox(11))
    Xe = rng.standard_normal((8, 6))
    base = plsr.predict(plsr.fit(X, y, 6), Xe)
    for s in (3.0, 0.01):
        Xs, Xes = X.copy(), Xe.copy()
        Xs[:, 2] *= s
        Xes[:, 2] *= s
        scaled = plsr.predict(plsr.fit(Xs, y, 6), Xes)
        assert np.abs(scaled - base).max() < 1e-8


def test_fit_is_deterministic():
    X, y = well_conditioned_xy(seed=12)
    a = plsr.fit(X, y, 7)
    b = plsr.fit(X, y, 7)
    assert np.array_equal(a.coefficients, b.coefficients)
    assert np.array_equal(a.x_mean, b.x_mean)
    assert a.y_mean == b.y_mean


def test_early_stop_records_truncation():
    # rank-1 X: only one component is extractable
    rng = np.random.Generator(np.random.Philox(13))
    u = rng.standard_normal(15)
    v = rng.standard_normal(4)
    X = np.outer(u, v)
    y = 2.0 * u + 1.0
    model = plsr.fit(X, y, 3)
    assert model.n_components == 1
    assert model.training_meta["requested_components"] == 3


def test_component_path_matches_separate_fits():
    X, y = well_conditioned_xy(40, 12, seed=14)
    rng = np.random.Generator(np.random.Philox(15))
    Xe = rng.standard_normal((6, 12))
    path = plsr.component_path(X, y, Xe, [2, 4, 6])
    for k in (2, 4, 6):
        separate = plsr.predict(plsr.fit(X, y, k), Xe)
        assert np.abs(path[k] - separate).max() < 1e-10


def test_select_components_prefers_signal_rank():
    # y depends on 12 orthogonal factors embedded in 100 noise dims
    rng = np.random.Generator(np.random.Philox(16))
    n, p, rank = 120, 100, 12
    basis = np.linalg.qr(rng.standard_normal((p, rank)))[0]
    factors = rng.standard_normal((n, rank))
    X = factors @ basis.T + 0.05 * rng.standard_normal((n, p))
    y = factors @ rng.standard_normal(rank)
    n_val = 40
    best_k, table = plsr.select_components(
        X[n_val:], y[n_val:], X[:n_val], y[:n_val], k_range=(8, 16)
    )
    by_k = dict(table)
    assert all(by_k[best_k] >= v for v in by_k.values())
    assert min(k for k, v in table if v == by_k[best_k]) == best_k  # ties toward smaller k


def test_select_components_singleton_range():
    X, y = well_conditioned_xy(seed=17)
    best_k, table = plsr.select_components(X[:35], y[:35], X[35:], y[35:], k_range=(5, 5))
    assert best_k == 5
    assert [k for k, _ in table] == [5]


def test_select_components_clips_range():
    rng = np.random.Generator(np.random.Philox(18))
    X = rng.standard_normal((16, 30))  # N_train - 1 = 11 < sweep hi
    y = X[:, 0] + 0.2 * rng.standard_normal(16)
    best_k, table = plsr.select_components(X[:12], y[:12], X[12:], y[12:], k_range=(10, 20))
    assert max(k for k, _ in table) <= 11  # min(N_train - 1, p)
    assert best_k <= 11


def test_standardize_switch_changes_nothing_structurally():
    X, y = well_conditioned_xy(seed=19)
    model = plsr.fit(X, y, 5, standardize=True)
    pred = plsr.predict(model, X)
    assert np.all(np.isfinite(pred))
    assert abs(pred.mean() - y.mean()) < 1.0


def test_model_roundtrip(tmp_path):
    X, y = well_conditioned_xy(seed=20)
    meta = {"layer_config": "res2a/res4b/res4f", "pooling_mode": "mean_std"}
    model = plsr.fit(X, y, 6, training_meta=meta)
    path = tmp_path / "model.plsr"
    plsr.save_model(model, path)
    loaded = plsr.load_model(path)
    assert loaded.n_components == model.n_components
    assert np.array_equal(loaded.x_mean, model.x_mean)
    assert np.array_equal(loaded.coefficients, model.coefficients)
    assert loaded.y_mean == model.y_mean
    assert loaded.training_meta["layer_config"] == "res2a/res4b/res4f"
    raw = path.read_bytes()
    assert raw[:4] == b"PLSR"


def test_model_reader_rejects_unknown_version(tmp_path):
    X, y = well_conditioned_xy(seed=21)
    model = plsr.fit(X, y, 2)
    path = tmp_path / "model.plsr"
    plsr.save_model(model, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 99  # bump the little-endian version field
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelFormatError):
        plsr.load_model(path)
    with pytest.raises(ModelFormatError):
        plsr.load_model(__file__)
