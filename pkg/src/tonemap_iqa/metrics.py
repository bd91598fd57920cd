"""Agreement metrics between predictions and MOS: SROCC, PLCC, RMSE.

SROCC is Pearson correlation on average (fractional) ranks; PLCC and
RMSE are computed on raw values by default. ``logistic_remap`` applies
the 4-parameter logistic sometimes used in IQA evaluation before
PLCC/RMSE; it is opt-in and never used in acceptance numbers.
"""

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, LengthMismatchError


def _paired(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise LengthMismatchError("inputs must be 1-D vectors")
    if len(a) != len(b):
        raise LengthMismatchError(f"length mismatch: {len(a)} vs {len(b)}")
    return a, b


def _check_correlation_inputs(a, b):
    if len(a) < 2:
        raise DegenerateInputError("correlation needs at least 2 samples")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateInputError("correlation is undefined for a constant vector")


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(a, b) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    r = float(ac @ bc / np.sqrt((ac @ ac) * (bc @ bc)))
    return min(1.0, max(-1.0, r))


def srocc(a, b) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    a, b = _paired(a, b)
    _check_correlation_inputs(a, b)
    return _pearson(average_ranks(a), average_ranks(b))


def plcc(a, b) -> float:
    """Pearson linear correlation on raw values."""
    a, b = _paired(a, b)
    _check_correlation_inputs(a, b)
    return _pearson(a, b)


def rmse(a, b) -> float:
    """Root mean squared error."""
    a, b = _paired(a, b)
    if len(a) == 0:
        raise EmptyInputError("rmse needs at least one value")
    d = a - b
    return float(np.sqrt((d @ d) / len(a)))


def median(values) -> float:
    """Middle order statistic; even counts average the two middle values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("median of empty input")
    return float(np.median(values))


def logistic_remap(predictions, mos):
    """Fit Q(x) = b4 + (b1 - b4) / (1 + exp(-(x - b2) / |b3|)) and remap.

    The common monotone 4-parameter logistic from predictions to MOS,
    fitted by least squares. Falls back to the identity when the fit
    does not converge.
    """
    from scipy.optimize import curve_fit

    predictions, mos = _paired(predictions, mos)

    def logistic(x, b1, b2, b3, b4):
        return b4 + (b1 - b4) / (1.0 + np.exp(-(x - b2) / (abs(b3) + 1e-12)))

    spread = predictions.std() or 1.0
    p0 = (mos.max(), predictions.mean(), spread, mos.min())
    try:
        popt, _ = curve_fit(logistic, predictions, mos, p0=p0, maxfev=20000)
    except RuntimeError:
        return predictions
    return logistic(predictions, *popt)
