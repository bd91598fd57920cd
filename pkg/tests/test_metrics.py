"""SROCC/PLCC/RMSE/median against naive-loop oracles."""

import numpy as np
import pytest

from tonemap_iqa import metrics
from tonemap_iqa.errors import DegenerateInputError, EmptyInputError, LengthMismatchError


def oracle_ranks(values):
    """Scalar-loop average ranks (1-based)."""
    n = len(values)
    ranks = [0.0] * n
    for i in range(n):
        less = sum(1 for v in values if v < values[i])
        equal = sum(1 for v in values if v == values[i])
        ranks[i] = less + (equal + 1) / 2.0
    return ranks


def oracle_pearson(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    da = sum((x - ma) ** 2 for x in a)
    db = sum((y - mb) ** 2 for y in b)
    return num / (da * db) ** 0.5


def test_srocc_identical_order():
    assert metrics.srocc([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0


def test_srocc_reversed_order():
    assert metrics.srocc([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0


def test_srocc_with_ties_matches_oracle():
    a = [1.0, 2.0, 2.0, 3.0]
    b = [1.0, 3.0, 2.0, 4.0]
    assert oracle_ranks(a) == [1.0, 2.5, 2.5, 4.0]
    want = oracle_pearson(oracle_ranks(a), oracle_ranks(b))
    assert abs(metrics.srocc(a, b) - want) < 1e-12


def test_srocc_invariant_under_monotone_transform():
    rng = np.random.Generator(np.random.Philox(1))
    a = rng.random(30)
    b = rng.random(30)
    base = metrics.srocc(a, b)
    assert abs(metrics.srocc(np.exp(3 * a), b) - base) < 1e-12
    assert abs(metrics.srocc(a, b**3 + 5) - base) < 1e-12


def test_srocc_symmetric():
    rng = np.random.Generator(np.random.Philox(2))
    a, b = rng.random(25), rng.random(25)
    assert metrics.srocc(a, b) == metrics.srocc(b, a)


def test_correlations_bounded_on_random_inputs():
    rng = np.random.Generator(np.random.Philox(3))
    for _ in range(50):
        n = int(rng.integers(2, 40))
        a = rng.integers(0, 5, n).astype(float)
        b = rng.integers(0, 5, n).astype(float)
        if np.all(a == a[0]) or np.all(b == b[0]):
            continue
        assert abs(metrics.srocc(a, b)) <= 1.0
        assert abs(metrics.plcc(a, b)) <= 1.0


def test_plcc_affine():
    a = np.array([1.0, 2.0, 5.0, 7.0])
    assert metrics.plcc(a, 3 * a + 1) == 1.0
    assert metrics.plcc(a, -a) == -1.0


def test_plcc_matches_naive_loop():
    rng = np.random.Generator(np.random.Philox(0))
    a = rng.random(20)
    b = rng.random(20)
    assert abs(metrics.plcc(a, b) - oracle_pearson(list(a), list(b))) < 1e-12


def test_plcc_affine_invariance_and_negation():
    rng = np.random.Generator(np.random.Philox(4))
    a, b = rng.random(15), rng.random(15)
    base = metrics.plcc(a, b)
    assert abs(metrics.plcc(2.5 * a + 3, b) - base) < 1e-12
    assert abs(metrics.plcc(a, -4 * b) + base) < 1e-12


def test_correlation_errors():
    with pytest.raises(LengthMismatchError):
        metrics.srocc([1, 2], [1, 2, 3])
    with pytest.raises(DegenerateInputError):
        metrics.srocc([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInputError):
        metrics.plcc([1, 2, 3], [5, 5, 5])
    with pytest.raises(DegenerateInputError):
        metrics.plcc([1.0], [2.0])


def test_rmse_identity_and_analytic():
    assert metrics.rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert abs(metrics.rmse([0, 0], [3, 4]) - np.sqrt(12.5)) < 1e-12


def test_rmse_matches_naive_loop():
    rng = np.random.Generator(np.random.Philox(5))
    a, b = rng.random(17) * 100, rng.random(17) * 100
    want = (sum((x - y) ** 2 for x, y in zip(a, b)) / 17) ** 0.5
    assert abs(metrics.rmse(a, b) - want) < 1e-12


def test_rmse_zero_iff_equal():
    a = np.array([1.0, 2.0])
    assert metrics.rmse(a, a) == 0.0
    assert metrics.rmse(a, a + 1e-9) > 0.0
    with pytest.raises(LengthMismatchError):
        metrics.rmse([1.0], [1.0, 2.0])


def test_median_basics():
    assert metrics.median([3, 1, 2]) == 2.0
    assert metrics.median([1, 2, 3, 4]) == 2.5
    with pytest.raises(EmptyInputError):
        metrics.median([])


def test_median_matches_sort_oracle():
    rng = np.random.Generator(np.random.Philox(6))
    values = rng.random(1000) * 50
    ordered = sorted(values)
    want = (ordered[499] + ordered[500]) / 2.0
    assert metrics.median(values) == want


def test_logistic_remap_improves_or_keeps_plcc():
    rng = np.random.Generator(np.random.Philox(7))
    x = rng.random(60) * 10
    mos = 100 / (1 + np.exp(-(x - 5))) + rng.normal(0, 1, 60)
    mapped = metrics.logistic_remap(x, mos)
    assert metrics.plcc(mapped, mos) >= metrics.plcc(x, mos) - 1e-9
