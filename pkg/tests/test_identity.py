import json
import math
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from enflolab.averaging import box_average
from enflolab.identity import (
    IdentityCoefficients,
    _term_shifts,
    coefficient_pairs,
    coefficient_scale,
    decomposition_moment,
    decomposition_term,
    decomposition_term_table,
    fit_identity_coefficients,
    shell_difference_sum,
    shell_difference_sum_table,
    verify_identity,
)
from enflolab.torus import FunctionTable, TorusGeometry, sign_vectors

GOLDEN = Path(__file__).parent / "golden"


def true_coefficient(i, l):
    return math.comb(i, l) / math.factorial(i + 1)


def gaussian(n, m, d, seed):
    g = TorusGeometry(n, m)
    return FunctionTable.random_gaussian(g, d, np.random.default_rng(seed))


def test_coefficient_bookkeeping():
    assert coefficient_pairs(2) == [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]
    assert coefficient_scale(3, 3, 0) == 9 / 16
    assert coefficient_scale(3, 3, 2) == 1 / 16
    assert coefficient_scale(1, 5, 0) == 1.0


def test_term_shift_counts():
    for n in (1, 2, 3):
        g = TorusGeometry(n, 8)
        eps = np.ones(n, dtype=np.int64)
        for i in range(n + 1):
            for l in range(i + 1):
                shifts = list(_term_shifts(g, 3, i, l, eps))
                assert len(shifts) == math.comb(n, i) * math.comb(i, l)


def test_zero_subset_term_is_the_full_diagonal_difference():
    f = gaussian(2, 8, 1, seed=4)
    g = f.geometry
    eps = np.array([1, -1])
    nd = box_average(f, range(2), 3).nd_view()
    fwd = np.roll(nd, tuple(int(-e) for e in eps), axis=(0, 1))
    bwd = np.roll(nd, tuple(int(e) for e in eps), axis=(0, 1))
    want = (fwd - bwd).reshape(f.values.shape)
    got = decomposition_term_table(f, 0, 0, 3, eps)
    assert np.array_equal(got, want)


def test_term_table_matches_pointwise_terms():
    f = gaussian(2, 8, 2, seed=5)
    g = f.geometry
    eps = np.array([-1, 1])
    for i in range(3):
        for l in range(i + 1):
            table = decomposition_term_table(f, i, l, 3, eps)
            for idx in range(g.size):
                single = decomposition_term(f, i, l, 3, g.decode(idx), eps)
                assert np.abs(table[idx] - single).max() < 1e-12


def test_term_tables_are_linear():
    f = gaussian(2, 8, 1, seed=6)
    h = gaussian(2, 8, 1, seed=7)
    g = f.geometry
    combo = FunctionTable(g, 2.0 * f.values - 0.5 * h.values)
    eps = np.array([1, 1])
    a = decomposition_term_table(combo, 1, 0, 3, eps)
    b = 2.0 * decomposition_term_table(f, 1, 0, 3, eps) - 0.5 * decomposition_term_table(
        h, 1, 0, 3, eps
    )
    assert np.abs(a - b).max() < 1e-12


def test_full_subset_terms_vanish_exactly():
    f = gaussian(3, 8, 1, seed=8)
    eps = np.array([1, -1, 1])
    for l in range(4):
        table = decomposition_term_table(f, 3, l, 3, eps)
        assert np.array_equal(table, np.zeros_like(table))


def test_shell_sum_antisymmetry_and_pointwise_match():
    f = gaussian(2, 8, 1, seed=9)
    g = f.geometry
    eps = np.array([1, -1])
    table = shell_difference_sum_table(f, 3, eps)
    flipped = shell_difference_sum_table(f, 3, -eps)
    assert np.array_equal(flipped, -table)
    for idx in range(g.size):
        single = shell_difference_sum(f, 3, g.decode(idx), eps)
        assert np.abs(table[idx] - single).max() < 1e-12


@pytest.mark.parametrize("n,m,k", [(1, 8, 3), (2, 8, 3), (3, 8, 1)])
def test_identity_holds_with_the_known_coefficients(n, m, k):
    f = gaussian(n, m, 1, seed=100 + n)
    worst = 0.0
    for eps in sign_vectors(n):
        lhs = shell_difference_sum_table(f, k, eps)
        rhs = np.zeros_like(lhs)
        for i, l in coefficient_pairs(n):
            rhs += (
                true_coefficient(i, l)
                * coefficient_scale(n, k, i)
                * decomposition_term_table(f, i, l, k, eps)
            )
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    assert worst < 1e-10, worst


def test_fit_recovers_the_known_coefficients():
    g = TorusGeometry(2, 8)
    fitted = fit_identity_coefficients(g, 3, sample_budget=96, seed=42)
    assert fitted.coefficient(0, 0) == 1.0
    assert fitted.residual < 1e-8
    for i, l in coefficient_pairs(2):
        if i < 2:
            assert fitted.is_identifiable(i, l)
            assert abs(fitted.coefficient(i, l) - true_coefficient(i, l)) < 1e-6
        else:
            assert not fitted.is_identifiable(i, l)


def test_fit_budget_guard_names_the_parameter():
    with pytest.raises(ValueError, match="sample_budget"):
        fit_identity_coefficients(TorusGeometry(2, 8), 3, sample_budget=10, seed=0)


def test_verify_rejects_mismatched_inputs():
    g = TorusGeometry(2, 8)
    fitted = fit_identity_coefficients(g, 3, sample_budget=96, seed=1)
    with pytest.raises(ValueError):
        verify_identity(fitted, TorusGeometry(3, 8), 3)
    with pytest.raises(ValueError):
        verify_identity(fitted, g, 1)
    with pytest.raises(ValueError):
        verify_identity(fitted, g, 3, f=gaussian(2, 8, 2, seed=0))
    with pytest.raises(ValueError):
        verify_identity(fitted, g, 3, f=gaussian(2, 12, 1, seed=0))


@pytest.mark.parametrize("n,k", [(1, 3), (2, 1), (2, 3), (3, 3)])
def test_golden_coefficients_replay_on_fresh_samples(n, k):
    payload = json.loads((GOLDEN / f"h_coeffs_{n}_{k}.json").read_text())
    coeffs = IdentityCoefficients.from_json_dict(payload)
    assert coeffs.to_json_dict() == payload
    check = verify_identity(coeffs, TorusGeometry(n, 8), k, seed=999)
    assert check.passed, check.max_residual
    assert check.samples == 200


def test_golden_shape_constants():
    three = IdentityCoefficients.from_json_dict(
        json.loads((GOLDEN / "h_coeffs_3_3.json").read_text())
    )
    assert abs(three.shape_constant() - 4.0 / 3.0) < 1e-9
    two = IdentityCoefficients.from_json_dict(
        json.loads((GOLDEN / "h_coeffs_2_3.json").read_text())
    )
    assert abs(two.shape_constant() - 1.0) < 1e-9


def test_moment_report_and_dimension_guard():
    with pytest.raises(ValueError):
        decomposition_moment(gaussian(1, 8, 1, 0), 0, 0, 3, 2.0, 2.0)
    report = decomposition_moment(gaussian(2, 8, 1, seed=11), 1, 0, 3, 2.0, 2.0)
    assert report.evaluator == "decomposition_moment"
    assert report.lhs > 0.0
    assert report.ratio is not None
    assert report.n == 2 and report.m == 8 and report.k == 3


def test_moment_symmetry_in_the_disagreement_count():
    f = gaussian(3, 8, 1, seed=12)
    a = decomposition_moment(f, 2, 0, 3, 2.0, 2.0)
    b = decomposition_moment(f, 2, 2, 3, 2.0, 2.0)
    assert abs(a.lhs - b.lhs) < 1e-12 * max(1.0, a.lhs)


def test_index_validation():
    f = gaussian(2, 8, 1, seed=0)
    with pytest.raises(ValueError):
        decomposition_term_table(f, 3, 0, 3, np.array([1, 1]))
    with pytest.raises(ValueError):
        decomposition_term_table(f, 1, 2, 3, np.array([1, 1]))
    with pytest.raises(ValueError):
        decomposition_term_table(f, 1, 0, 3, np.array([1, 2]))
