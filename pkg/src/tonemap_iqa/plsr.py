"""Partial least squares regression (single response), from scratch.

NIPALS/PLS1 with deflation in double precision. For a single response
the per-component weight is closed-form, so no inner iteration is
needed:

    w_i = X'y / ||X'y||        (weights)
    t_i = X w_i                (scores)
    p_i = X't_i / (t_i't_i)    (X loadings)
    q_i = y't_i / (t_i't_i)    (y loading)
    X <- X - t_i p_i',  y <- y - q_i t_i

The final regressor on centered data is b = W (P'W)^{-1} q, where P'W
is upper triangular with unit diagonal under NIPALS and is inverted by
back-substitution. Predictions are y_mean + (x - x_mean) . b.

Features are not standardized by default (``standardize=True`` z-scores
columns as an experiment switch; it is off in all acceptance runs).
"""

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTargetError,
    DimensionMismatchError,
    ModelFormatError,
    NumericalBreakdownError,
    TooManyComponentsError,
)
from .metrics import srocc

logger = logging.getLogger(__name__)

RESIDUAL_EPS = 1e-12  # early stop when ||X'y|| falls below this
SCORE_EPS = 1e-300  # breakdown when t't falls below this
DIAG_EPS = 1e-12  # breakdown threshold on P'W diagonal magnitude

MODEL_MAGIC = b"PLSR"
MODEL_VERSION = 1


@dataclass(frozen=True)
class PLSRModel:
    """Fitted PLS1 model: centering vectors plus regression coefficients."""

    n_components: int
    x_mean: np.ndarray  # float64, length p
    y_mean: float
    coefficients: np.ndarray  # float64, length p, for centered data
    training_meta: dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return len(self.coefficients)


def _validate_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimensionMismatchError(f"y shape {y.shape} does not match X rows {X.shape[0]}")
    return X, y


def _nipals(X, y, k):
    """Run k NIPALS components on centered copies; returns (W, P, q, T, reached)."""
    n, p = X.shape
    W = np.empty((p, k))
    P = np.empty((p, k))
    q = np.empty(k)
    T = np.empty((n, k))
    Xd = X.copy()
    yd = y.copy()
    reached = 0
    for i in range(k):
        xy = Xd.T @ yd
        norm = np.linalg.norm(xy)
        if norm < RESIDUAL_EPS:
            break
        w = xy / norm
        t = Xd @ w
        tt = t @ t
        if tt < SCORE_EPS:
            raise NumericalBreakdownError(f"component {i + 1}: score norm {tt:.3e} below {SCORE_EPS:.0e}")
        pvec = Xd.T @ t / tt
        qi = yd @ t / tt
        Xd -= np.outer(t, pvec)
        yd -= qi * t
        W[:, i] = w
        P[:, i] = pvec
        q[i] = qi
        T[:, i] = t
        reached = i + 1
    return W[:, :reached], P[:, :reached], q[:reached], T[:, :reached], reached


def _coefficients(W, P, q):
    """b = W (P'W)^{-1} q via back-substitution on the triangular P'W."""
    k = W.shape[1]
    R = P.T @ W
    z = np.empty(k)
    for i in range(k - 1, -1, -1):
        if abs(R[i, i]) < DIAG_EPS:
            raise NumericalBreakdownError(f"P'W diagonal {R[i, i]:.3e} at component {i + 1}")
        z[i] = (q[i] - R[i, i + 1 :] @ z[i + 1 :]) / R[i, i]
    return W @ z


def fit(X, y, n_components: int, training_meta: dict | None = None, standardize: bool = False) -> PLSRModel:
    """Fit a PLS1 model with ``n_components`` latent components.

    Parameters
    ----------
    X : (N, p) array of descriptors, one row per sample.
    y : (N,) target vector (MOS).
    n_components : requested component count k, 1 <= k <= min(N - 1, p).
    training_meta : optional dict stored with the model (layer config etc.).
    standardize : z-score columns before fitting (off by default and in
        all acceptance runs); constant columns are left unscaled.

    Returns a PLSRModel. If the residual collapses early, the model has
    fewer components than requested and records the request in its meta.
    """
    X, y = _validate_xy(X, y)
    n, p = X.shape
    if n < 2 or np.all(y == y[0]):
        raise DegenerateTargetError("y is constant (or has fewer than two samples)")
    k_max = min(n - 1, p)
    if not 1 <= n_components <= k_max:
        raise TooManyComponentsError(
            f"n_components {n_components} outside [1, min(N-1, p)] = [1, {k_max}]"
        )

    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    x_scale = None
    if standardize:
        x_scale = Xc.std(axis=0)
        x_scale[x_scale == 0.0] = 1.0
        Xc = Xc / x_scale

    W, P, q, _, reached = _nipals(Xc, yc, n_components)
    if reached == 0:
        raise DegenerateTargetError("X'y vanished before the first component")
    if reached < n_components:
        logger.warning("PLSR stopped early at %d of %d components", reached, n_components)
    b = _coefficients(W, P, q)
    if standardize:
        b = b / x_scale
    if not np.all(np.isfinite(b)):
        raise NumericalBreakdownError("non-finite regression coefficients")

    meta = dict(training_meta or {})
    meta.setdefault("n_samples", n)
    meta.setdefault("feature_dim", p)
    if reached < n_components:
        meta["requested_components"] = n_components
    return PLSRModel(
        n_components=reached,
        x_mean=x_mean,
        y_mean=float(y_mean),
        coefficients=b,
        training_meta=meta,
    )


def predict(model: PLSRModel, X) -> np.ndarray:
    """Predicted scores y_mean + (x - x_mean) . b for each row; unclamped.

    Rows are reduced one at a time so a batch prediction is bit-identical
    to predicting row by row (BLAS gemv and dot may differ in the last
    ulp otherwise).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.feature_dim:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} columns, model expects {model.feature_dim}"
        )
    b = model.coefficients
    out = np.empty(len(X))
    for i, row in enumerate(X - model.x_mean):
        out[i] = row @ b
    return out + model.y_mean


def component_path(X_tr, y_tr, X_eval, k_values, standardize: bool = False):
    """Evaluate predictions on X_eval for each k in k_values with one NIPALS pass.

    NIPALS components are nested, so the k-component model is a prefix of
    the k_max-component run; per-k coefficients come from per-k
    back-substitution. Returns {k: predictions}, capped at the deepest
    component the data supports.
    """
    X_tr, y_tr = _validate_xy(X_tr, y_tr)
    if np.all(y_tr == y_tr[0]):
        raise DegenerateTargetError("y is constant")
    k_values = sorted(set(int(k) for k in k_values))
    k_cap = min(X_tr.shape[0] - 1, X_tr.shape[1])
    x_mean = X_tr.mean(axis=0)
    y_mean = y_tr.mean()
    Xc = X_tr - x_mean
    yc = y_tr - y_mean
    x_scale = None
    if standardize:
        x_scale = Xc.std(axis=0)
        x_scale[x_scale == 0.0] = 1.0
        Xc = Xc / x_scale
    W, P, q, _, reached = _nipals(Xc, yc, min(max(k_values), k_cap))
    Xe = np.asarray(X_eval, dtype=np.float64) - x_mean
    out = {}
    for k in k_values:
        kk = min(k, reached)
        if kk == 0:
            continue
        b = _coefficients(W[:, :kk], P[:, :kk], q[:kk])
        if standardize:
            b = b / x_scale
        out[k] = Xe @ b + y_mean
    return out


def select_components(X_tr, y_tr, X_val, y_val, k_range=(10, 20), standardize: bool = False):
    """Pick the component count with the best validation SROCC.

    ``k_range`` is an inclusive (lo, hi) pair; it is clipped to
    min(N_train - 1, p) with a warning when the data cannot support it.
    Ties break toward smaller k. Returns (best_k, [(k, srocc), ...]).
    """
    lo, hi = int(k_range[0]), int(k_range[1])
    if lo > hi:
        raise TooManyComponentsError(f"empty component range [{lo}, {hi}]")
    X_tr = np.asarray(X_tr, dtype=np.float64)
    k_cap = min(X_tr.shape[0] - 1, X_tr.shape[1])
    if hi > k_cap:
        logger.warning("component range [%d, %d] clipped to <= %d (N-1 or p)", lo, hi, k_cap)
        hi = k_cap
        lo = min(lo, hi)
    if hi < 1:
        raise TooManyComponentsError("too few training samples for any component")
    preds = component_path(X_tr, y_tr, X_val, range(lo, hi + 1), standardize=standardize)
    y_val = np.asarray(y_val, dtype=np.float64)
    table = [(k, float(srocc(preds[k], y_val))) for k in sorted(preds)]
    best_k, _ = max(table, key=lambda kv: (kv[1], -kv[0]))
    return best_k, table


def save_model(model: PLSRModel, path) -> None:
    """Write the .plsr binary format (all little-endian).

    Layout: magic "PLSR", u32 version, u32 k, u32 p, x_mean (p float64),
    y_mean (float64), b (p float64), u32 length + UTF-8 JSON meta.
    """
    meta = json.dumps(model.training_meta, sort_keys=True).encode("utf-8")
    p = model.feature_dim
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<III", MODEL_VERSION, model.n_components, p))
        fh.write(np.ascontiguousarray(model.x_mean, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.y_mean))
        fh.write(np.ascontiguousarray(model.coefficients, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def load_model(path) -> PLSRModel:
    """Read a .plsr file written by save_model; rejects unknown versions."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a .plsr file")
    version, k, p = struct.unpack_from("<III", blob, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported .plsr version {version}")
    off = 16
    x_mean = np.frombuffer(blob, dtype="<f8", count=p, offset=off).copy()
    off += 8 * p
    (y_mean,) = struct.unpack_from("<d", blob, off)
    off += 8
    b = np.frombuffer(blob, dtype="<f8", count=p, offset=off).copy()
    off += 8 * p
    (meta_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    meta = json.loads(blob[off : off + meta_len].decode("utf-8"))
    return PLSRModel(n_components=k, x_mean=x_mean, y_mean=y_mean, coefficients=b, training_meta=meta)
