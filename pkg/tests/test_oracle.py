import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twomode import bethe
from twomode.oracle import (
    CapacityError, build_fock_hamiltonian, diagonalize_block, eigenvector_to_polynomial,
    oracle_bethe_check, oracle_states, polynomial_roots,
)
from twomode.polynomial import Polynomial
from twomode.repkit import BlockLabel, ModelParams, build_block_matrices

from conftest import model_and_block, nonzero_g

SQRT2 = math.sqrt(2)


def test_doublet_matrix_and_spectrum(doublet):
    model, label = doublet
    H = build_fock_hamiltonian(model, label)
    assert np.array_equal(H, [[0, 0.5], [0.5, 1]])
    # eigenvalues of [[0, b], [b, 1]] from the quadratic formula
    ref = [(1 - math.sqrt(1 + 4 * 0.25)) / 2, (1 + math.sqrt(1 + 4 * 0.25)) / 2]
    got = [e for e, _ in diagonalize_block(H)]
    assert got == pytest.approx(ref, abs=1e-14)
    assert got == pytest.approx([-0.20710678, 1.20710678], abs=1e-8)


def test_one_by_one_block():
    (e, v), = diagonalize_block(np.array([[3.25]]))
    assert e == 3.25 and v[0] == 1.0


def test_nonsymmetric_rejected():
    with pytest.raises(ValueError):
        diagonalize_block(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_g_zero_diagonal():
    model = ModelParams(2, 1, 1.0, 2.0)
    H = build_fock_hamiltonian(model, BlockLabel(3, 1, 0))
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    n1, n2 = BlockLabel(3, 1, 0).occupations(model)
    assert sorted(np.diag(H)) == sorted(n1 + 2.0 * n2)


def test_capacity():
    with pytest.raises(CapacityError):
        build_fock_hamiltonian(ModelParams(3, 3, g=1.0), BlockLabel(60))


@given(model_and_block(max_M=8))
def test_matches_repkit_and_eigensolver_contract(mb):
    model, label = mb
    H = build_fock_hamiltonian(model, label)
    assert np.allclose(H, build_block_matrices(model, label).h, rtol=1e-10, atol=0)
    pairs = diagonalize_block(H)
    V = np.array([v for _, v in pairs]).T
    E = np.array([e for e, _ in pairs])
    assert np.all(np.diff(E) >= 0)
    assert np.allclose(V.T @ V, np.eye(len(E)), atol=1e-10)
    norm = max(np.linalg.norm(H, 2), 1e-300)
    for e, v in pairs:
        assert np.linalg.norm(H @ v - e * v) <= 1e-10 * max(norm, 1.0)
        first = v[np.flatnonzero(np.abs(v) > 1e-14)[0]]
        assert first > 0
    assert E.sum() == pytest.approx(np.trace(H), rel=1e-10, abs=1e-10)


@given(model_and_block(max_M=6))
def test_flip_relabeling_preserves_spectrum(mb):
    model, label = mb
    H = build_fock_hamiltonian(model, label)
    J = np.eye(label.dim())[::-1]
    a = np.linalg.eigvalsh(H)
    b = np.linalg.eigvalsh(J @ H @ J)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(a))))


def test_basis_vectors_to_polynomials():
    model, label = ModelParams(2, 1), BlockLabel(3, 1, 0)
    top, deficient = eigenvector_to_polynomial(np.eye(4)[-1], model, label)
    assert not deficient and top.allclose(Polynomial.monomial(3))
    const, deficient = eigenvector_to_polynomial(np.eye(4)[0], model, label)
    assert deficient and const.degree == 0


def test_doublet_ground_root_solves_bae(doublet):
    model, label = doublet
    st0 = oracle_states(model, label)[0]
    assert st0.monomial_coeffs.tolist() == pytest.approx([-(1 + SQRT2), 1.0])
    (alpha,) = st0.roots
    # P_1(z) = -g z^2 + B z + g with B = w1 - w2 = 1
    assert abs(-0.5 * alpha**2 + alpha + 0.5) < 1e-14


def test_polynomial_roots_examples():
    assert np.allclose(polynomial_roots(Polynomial([1, 0, 1])), [-1j, 1j])
    assert np.allclose(polynomial_roots(Polynomial([-1, -2, 1])), [1 - SQRT2, 1 + SQRT2])
    assert polynomial_roots(Polynomial([4.0])).size == 0


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.05, 3)), min_size=1, max_size=3),
       st.lists(st.floats(-3, 3), min_size=0, max_size=2))
def test_polynomial_roots_round_trip(pairs, reals):
    true = [complex(a, b) for a, b in pairs] + [complex(a, -b) for a, b in pairs]
    true += [complex(x) for x in reals]
    true = np.array(true)
    spread = np.min(np.abs(true[:, None] - true[None, :]) + np.eye(len(true)) * 10)
    if spread < 0.05:
        return
    poly = Polynomial(Polynomial.from_roots(true).coefficients.real)
    got = polynomial_roots(poly)
    for z in true:
        assert np.min(np.abs(got - z)) < 1e-8 * max(1, abs(z)) / spread ** 2 + 1e-8
    assert np.max(np.abs(poly(got))) <= 1e-8 * np.max(np.abs(poly.coefficients)) * 10


@given(model_and_block(max_M=6, g=nonzero_g))
def test_roots_reconstruct_monic_polynomial(mb):
    model, label = mb
    for st_ in oracle_states(model, label):
        if st_.leading_deficient or not label.M:
            continue
        gaps = np.abs(st_.roots[:, None] - st_.roots[None, :]) + np.eye(label.M)
        if gaps.min() < 1e-3:
            continue
        rebuilt = bethe.wavefunction_from_roots(st_.roots).padded(label.dim())
        scale = np.max(np.abs(st_.monomial_coeffs))
        assert np.max(np.abs(rebuilt - st_.monomial_coeffs)) <= 1e-8 * scale


def test_oracle_bethe_check_examples():
    rng = np.random.default_rng(3)
    for M in range(7):
        model = ModelParams(1, 1, *rng.uniform(-2, 2, 5), g=0.8)
        assert oracle_bethe_check(model, BlockLabel(M)).max_residual < 1e-8
    for M in range(5):
        model = ModelParams(3, 3, *rng.uniform(-2, 2, 5), g=-1.1)
        rep = oracle_bethe_check(model, BlockLabel(M, 2, 1))
        assert rep.max_energy_error < 1e-8
    rep = oracle_bethe_check(ModelParams(1, 1, 1.0), BlockLabel(2))
    assert rep.skipped and "exactly solvable" in rep.note
