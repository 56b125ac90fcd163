import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twomode.diffop import (
    ERRATA, UnsupportedCaseError, apply_diffop, build_diffop, case_coefficients,
    expand_euler_product, exact_zeros, leading_term_check, normalized_matrix,
    operator_matrix, stirling_L, DiffOperator,
)
from twomode.oracle import build_fock_hamiltonian
from twomode.polynomial import Polynomial
from twomode.repkit import BlockLabel, ModelParams, allowed_q, build_block_matrices

from conftest import model_and_block


def stirling2(k, i):
    """Second-kind Stirling numbers by the triangle recurrence."""
    S = [[0] * (k + 1) for _ in range(k + 1)]
    S[0][0] = 1
    for n in range(1, k + 1):
        for j in range(1, n + 1):
            S[n][j] = j * S[n - 1][j] + S[n - 1][j - 1]
    return S[k][i]


def test_stirling_small():
    assert stirling_L(2, 1) == stirling2(2, 1) == 1
    assert stirling_L(2, 2) == 1
    assert stirling_L(3, 2) == stirling2(3, 2) == 3


def test_stirling_diagonal():
    assert all(stirling_L(k, k) == 1 for k in range(1, 13))


@pytest.mark.parametrize("k,i", [(0, 0), (3, 0), (3, 4), (2, -1)])
def test_stirling_out_of_range(k, i):
    with pytest.raises(IndexError):
        stirling_L(k, i)


@given(st.integers(1, 12).flatmap(lambda k: st.tuples(st.just(k), st.integers(1, k))))
def test_stirling_matches_recurrence(ki):
    assert stirling_L(*ki) == stirling2(*ki)


def test_euler_product_examples():
    assert expand_euler_product([0]) == [0, 1]
    assert expand_euler_product([1, 2]) == [2, 4, 1]
    c = expand_euler_product([Fraction(1, 4) - Fraction(1, 4), Fraction(1, 4) - Fraction(3, 4)])
    assert c[0] == 0
    with pytest.raises(ValueError):
        expand_euler_product([])


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_euler_product_on_monomials(a):
    # z^i d^i z^m = m (m-1) ... (m-i+1) z^m, so the operator acts by a number
    c = expand_euler_product(a)
    for m in range(21):
        lhs = sum(ci * math.perm(m, i) for i, ci in enumerate(c))
        rhs = math.prod(m + aj for aj in a)
        scale = sum(abs(ci) * math.perm(m, i) for i, ci in enumerate(c)) + 1
        assert abs(lhs - rhs) <= 1e-12 * scale


def test_11_operator_matches_table():
    model = ModelParams(1, 1, 0.3, -0.7, 1.1, 0.4, -0.2, 0.6)
    for M in range(5):
        label = BlockLabel(M)
        op = build_diffop(model, label)
        A = 1.1 + 0.4 + 0.4
        assert op.p[2].allclose(Polynomial([0, 0, A]))
        assert op.order == 2


def test_22_and_33_leading_polynomials():
    g = 0.7
    op = build_diffop(ModelParams(2, 2, 0.1, 0.2, 0.3, 0.4, 0.5, g), BlockLabel(3))
    tab = case_coefficients(op.model, op.label)
    assert op.p[2].allclose(Polynomial([0, 4 * g, 4 * tab.constants["A22"], 4 * g]), rtol=1e-13)
    op = build_diffop(ModelParams(3, 3, g=g), BlockLabel(2, 1, 0))
    assert op.p[3].allclose(Polynomial([0, 0, 27 * g, 0, -27 * g]), rtol=1e-13)


def test_case_constant_examples():
    m = ModelParams(1, 1, w11=1, w22=1)
    assert case_coefficients(m, BlockLabel(2)).constants["A11"] == 2
    m = ModelParams(2, 1, w1=2)
    assert case_coefficients(m, BlockLabel(3, 1, 0)).constants["B21"] == 4
    m = ModelParams(3, 3, g=0.5)
    assert case_coefficients(m, BlockLabel(1, 0, 0)).constants["D33"] == pytest.approx(27.0)


def test_case_table_unsupported():
    with pytest.raises(UnsupportedCaseError):
        case_coefficients(ModelParams(1, 2), BlockLabel(1))


def table_error(model, label, corrected):
    op = build_diffop(model, label)
    tab = case_coefficients(model, label, corrected=corrected).as_operator(op.order)
    worst = 0.0
    for a, b in zip(op.p, tab.p):
        n = max(len(a.coefficients), len(b.coefficients), 1)
        x, y = a.padded(n), b.padded(n)
        scale = max(np.max(np.abs(x)), np.max(np.abs(y)))
        if scale:
            worst = max(worst, np.max(np.abs(x - y)) / scale)
    return worst


@given(model_and_block(degrees=[(1, 1), (2, 1), (2, 2), (3, 3)]))
def test_corrected_tables_match_operator(mb):
    assert table_error(*mb, corrected=True) < 1e-12


def test_printed_33_table_differs_only_in_g33():
    # the printed w22 coefficient of G33 disagrees with the operator
    assert "G33" in ERRATA
    model = ModelParams(3, 3, w22=1.0, g=0.3)
    label = BlockLabel(2, 1, 1)
    assert table_error(model, label, corrected=False) > 1e-3
    assert table_error(model, label, corrected=True) < 1e-14
    # with w22 = 0 the printed table is exact
    assert table_error(model.with_couplings(w22=0.0, w11=0.4), label, corrected=False) < 1e-14


def test_apply_trivial():
    op = build_diffop(ModelParams(2, 1, 1, 1, 1, 1, 1, 1), BlockLabel(2))
    assert apply_diffop(op, Polynomial()).is_zero()
    c = DiffOperator(2, (Polynomial([2.5]), Polynomial(), Polynomial()))
    p = Polynomial([1, -2, 3])
    assert apply_diffop(c, p).allclose(p * 2.5)


def test_apply_11_on_z():
    model = ModelParams(1, 1, 0.3, -0.7, 1.1, 0.4, -0.2, 0.6)
    op = build_diffop(model, BlockLabel(3))
    by_hand = op.p[1] + op.p[0] * Polynomial([0, 1])
    assert apply_diffop(op, Polynomial([0, 1])).allclose(by_hand, rtol=1e-14)


@given(model_and_block(max_M=8))
def test_invariant_subspace(mb):
    model, label = mb
    op = build_diffop(model, label)
    assert apply_diffop(op, Polynomial.monomial(label.M)).degree <= label.M
    for i, p in enumerate(op.p[1:], start=1):
        assert p.degree <= i + 1
    assert op.order == max(model.s, model.r, 2)


def rel_entrywise(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    floor = 1e-13 * scale
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


@given(model_and_block(max_M=8))
def test_triple_equivalence(mb):
    model, label = mb
    H1 = build_block_matrices(model, label).h
    H2 = build_fock_hamiltonian(model, label)
    H3 = normalized_matrix(build_diffop(model, label), model, label)
    assert rel_entrywise(H1, H2) < 1e-9
    assert rel_entrywise(H1, H3) < 1e-9


def test_operator_matrix_exact_is_tridiagonal():
    model = ModelParams(2, 3, g=Fraction(1, 3))
    op = build_diffop(model, BlockLabel(4, 1, 2))
    rows = operator_matrix(op, 4, exact=True)
    for m in range(5):
        for n in range(5):
            if abs(m - n) > 1:
                assert rows[m][n] == 0


def test_leading_term_examples():
    model = ModelParams(2, 3, 0.2, 0.1, -0.4, 0.3, 0.7, 1.3)
    rep = leading_term_check(model, BlockLabel(4, 1, 2))
    assert rep.ok
    assert rep.closure_exact == 0
    # at m = M-1 the product reduces to (r + d2)!/d2! times the g coupling
    assert rep.formula[-2] == pytest.approx(1.3 * math.factorial(5) / math.factorial(2))
    zero = leading_term_check(model.with_couplings(g=0.0), BlockLabel(4, 1, 2))
    assert all(v == 0 for v in zero.formula + zero.observed)


@pytest.mark.parametrize("s,r", [(1, 1), (2, 1), (1, 2), (2, 2), (3, 3), (4, 2)])
def test_exact_zeros(s, r):
    model = ModelParams(s, r)
    for d1 in range(s):
        for d2 in range(r):
            for M in range(9):
                prod_a, closure = exact_zeros(model, BlockLabel(M, d1, d2))
                assert prod_a == 0 and closure == 0
    for q1 in allowed_q(s):
        assert math.prod(q1 - Fraction((j - 1) * s + 1, s * s) for j in range(1, s + 1)) == 0
