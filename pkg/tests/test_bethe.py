import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twomode.bethe import (
    BetheState, DegenerateConfigurationError, IncompleteSpectrumWarning,
    InconsistentRootSetError, InvalidStateError, SolverConfig, bae_jacobian, bae_residuals,
    coefficient_newton, energy_from_roots, energy_prefactor, eigen_residual,
    liouville_check, match_spectrum, scaled_residual, solve_bae, wavefunction_from_roots,
)
from twomode.diffop import build_diffop, normalized_matrix
from twomode.oracle import oracle_states
from twomode.repkit import BlockLabel, ModelParams

from conftest import model_and_block, nonzero_g

SQRT2 = math.sqrt(2)


def test_m1_residual_is_p1():
    g, B = 0.7, 1.3
    model = ModelParams(1, 1, w1=B, g=g)
    label = BlockLabel(1)
    for a in (0.3, -1.2 + 0.4j):
        (res,) = bae_residuals([a], model, label)
        assert res == pytest.approx(-g * a * a + B * a + g, abs=1e-14)
        (jac,), = bae_jacobian([a], model, label)
        assert jac == pytest.approx(-2 * g * a + B, abs=1e-14)
    root = (B + math.sqrt(B * B + 4 * g * g)) / (2 * g)
    assert abs(bae_residuals([root], model, label)[0]) < 1e-14


def test_empty_residual():
    model = ModelParams(2, 1, g=1.0)
    assert bae_residuals([], model, BlockLabel(0)).shape == (0,)
    assert scaled_residual([], model, BlockLabel(0)) == 0.0


def test_coincident_roots_rejected():
    model = ModelParams(2, 2, g=1.0)
    with pytest.raises(DegenerateConfigurationError):
        bae_residuals([0.5, 0.5, 1.0], model, BlockLabel(3))


@given(model_and_block(max_M=5, g=nonzero_g), st.integers(0, 2**32 - 1))
def test_jacobian_matches_finite_differences(mb, seed):
    model, label = mb
    if label.M == 0:
        return
    rng = np.random.default_rng(seed)
    roots = rng.normal(size=label.M) + 1j * rng.normal(size=label.M)
    if np.min(np.abs(roots[:, None] - roots[None, :]) + np.eye(label.M) * 9) < 0.1:
        return
    J = bae_jacobian(roots, model, label)
    h = 1e-6
    fd = np.empty_like(J)
    for q in range(label.M):
        e = np.zeros(label.M)
        e[q] = h
        fd[:, q] = (bae_residuals(roots + e, model, label)
                    - bae_residuals(roots - e, model, label)) / (2 * h)
    assert np.linalg.norm(J - fd) <= 1e-5 * max(np.linalg.norm(J), 1e-8)


def test_jacobian_conjugate_pairs():
    model = ModelParams(2, 1, 0.2, 0.5, -0.3, 0.1, 0.4, 0.9)
    a = 0.4 + 0.7j
    roots = np.array([a, np.conj(a)])
    J = bae_jacobian(roots, model, BlockLabel(2, 1, 0))
    assert np.allclose(J[1, 1], np.conj(J[0, 0])) and np.allclose(J[1, 0], np.conj(J[0, 1]))


@pytest.mark.parametrize("r", [1, 2, 3, 4])
def test_energy_prefactor_is_factorial_ratio(r):
    for d2 in range(r):
        model = ModelParams(1, r)
        assert energy_prefactor(model, BlockLabel(2, 0, d2)) == Fraction(
            math.factorial(r + d2), math.factorial(d2))


def test_energy_trivial():
    assert energy_from_roots([], ModelParams(1, 1), BlockLabel(0)) == 0.0


def test_energy_rejects_unpaired_complex_roots():
    with pytest.raises(InconsistentRootSetError):
        energy_from_roots([1j, 2.0], ModelParams(1, 1, g=1.0), BlockLabel(2))


def test_wavefunction_examples():
    assert wavefunction_from_roots([]).allclose(wavefunction_from_roots([]))
    assert wavefunction_from_roots([]).coefficients.tolist() == [1.0]
    assert wavefunction_from_roots([1j, -1j]).coefficients.tolist() == [1.0, 0.0, 1.0]
    with pytest.raises(InvalidStateError):
        wavefunction_from_roots([1j, 1j])


def test_doublet(doublet):
    model, label = doublet
    states = solve_bae(model, label)
    assert [s.energy for s in states] == pytest.approx([-0.20710678, 1.20710678], abs=1e-8)
    roots = sorted(s.roots[0].real for s in states)
    assert roots == pytest.approx([1 - SQRT2, 1 + SQRT2], abs=1e-8)
    # E = 1 - g alpha from the 2x2 problem
    for s in states:
        assert s.energy == pytest.approx(1 - 0.5 * s.roots[0].real, abs=1e-12)


def test_m0_single_state():
    model = ModelParams(2, 2, 0.3, 0.1, 0.2, 0.5, 0.1, 1.0)
    (state,) = solve_bae(model, BlockLabel(0, 1, 1))
    assert state.roots.size == 0
    assert state.energy == pytest.approx(oracle_states(model, BlockLabel(0, 1, 1))[0].energy)


def test_g_zero_refused():
    with pytest.raises(ValueError):
        solve_bae(ModelParams(1, 1, 1.0), BlockLabel(1))


def test_22_m3_matches_oracle():
    rng = np.random.default_rng(11)
    model = ModelParams(2, 2, *rng.uniform(-2, 2, 5), g=0.9)
    label = BlockLabel(3, 1, 0)
    got = [s.energy for s in solve_bae(model, label)]
    ref = [o.energy for o in oracle_states(model, label)]
    rep = match_spectrum(got, ref, tol=1e-8)
    assert rep.complete() and len(rep.pairs) == 4


def check_state(state, model, label, rng):
    op = build_diffop(model, label)
    assert state.residual_norm <= 1e-8
    assert eigen_residual(state, model, label, op) <= 1e-7
    pts = rng.normal(size=5) + 1j * rng.normal(size=5)
    assert liouville_check(state, model, label, pts, op) <= 1e-7
    s = np.sum(state.roots)
    assert abs(s.imag) <= 1e-8 * (1 + abs(s.real))
    # permuting or conjugating the roots leaves the state unchanged
    perm = rng.permutation(state.roots)
    assert energy_from_roots(perm, model, label) == pytest.approx(state.energy, rel=1e-12, abs=1e-12)
    conj = wavefunction_from_roots(np.conj(state.roots))
    assert conj.allclose(state.polynomial, rtol=1e-8, atol=1e-8 * np.max(np.abs(state.monomial_coeffs)))


@given(model_and_block(max_M=5, g=nonzero_g))
def test_accepted_states_are_eigenstates(mb):
    model, label = mb
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IncompleteSpectrumWarning)
        states = solve_bae(model, label, SolverConfig(seed=1))
    ref = [o.energy for o in oracle_states(model, label)]
    rep = match_spectrum([s.energy for s in states], ref, tol=1e-8)
    assert not rep.unmatched_bethe
    rng = np.random.default_rng(0)
    for s in states:
        check_state(s, model, label, rng)


def test_oracle_seeding_gives_full_spectrum():
    rng = np.random.default_rng(5)
    model = ModelParams(3, 3, *rng.uniform(-2, 2, 5), g=-0.6)
    label = BlockLabel(4, 1, 2)
    ref = [o.energy for o in oracle_states(model, label) if not o.leading_deficient]
    got = solve_bae(model, label, SolverConfig(oracle_seeding=True, starts=0))
    rep = match_spectrum([s.energy for s in got], ref, tol=1e-8)
    assert rep.complete()


def test_coherent_linear_states_warn():
    # the pure linear model has eigenstates with a single repeated root
    model = ModelParams(1, 1, w1=1.0, g=0.5)
    with pytest.warns(IncompleteSpectrumWarning, match="coincident"):
        solve_bae(model, BlockLabel(3), SolverConfig(starts=40))


def test_disk_strategy_still_available(doublet):
    model, label = doublet
    states = solve_bae(model, label, SolverConfig(strategy="roots"))
    assert len(states) == 2
    with pytest.raises(ValueError):
        solve_bae(model, label, SolverConfig(strategy="nope"))


def test_coefficient_newton_finds_eigenpairs():
    rng = np.random.default_rng(2)
    model = ModelParams(2, 1, *rng.uniform(-2, 2, 6))
    label = BlockLabel(4, 1, 0)
    H = normalized_matrix(build_diffop(model, label), model, label)
    v, E, ok = coefficient_newton(H, rng.normal(size=(12, 5)), rng.uniform(-5, 5, 12))
    evals = np.linalg.eigvalsh(H)
    for j in np.flatnonzero(ok):
        assert np.min(np.abs(evals - E[j])) < 1e-10 * (1 + abs(E[j]))
        assert np.linalg.norm(H @ v[j] - E[j] * v[j]) < 1e-9 * np.linalg.norm(v[j]) * (1 + abs(E[j]))


def test_match_spectrum_trivial_cases():
    e = [0.5, -1.0, 2.0]
    rep = match_spectrum(e, e)
    assert len(rep.pairs) == 3 and rep.max_delta == 0
    rep = match_spectrum(e[:2], e, tol=1e-8)
    assert rep.unmatched_oracle == [2]


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8, unique=True), st.randoms())
def test_match_spectrum_order_invariant(energies, rnd):
    perturbed = [x + 1e-9 for x in energies]
    shuffled = list(perturbed)
    rnd.shuffle(shuffled)
    a = match_spectrum(perturbed, energies)
    b = match_spectrum(shuffled, energies)
    key = lambda rep, src: sorted((src[i], energies[j]) for i, j, _ in rep.pairs)
    assert key(a, perturbed) == key(b, shuffled)
    assert a.max_delta == pytest.approx(b.max_delta)


def test_bethe_state_polynomial():
    st_ = BetheState(roots=np.array([1j, -1j]), energy=0.0, residual_norm=0.0,
                     monomial_coeffs=np.array([1.0, 0.0, 1.0]))
    assert st_.polynomial(2.0) == 5.0


def test_clustered_simple_roots_are_recovered():
    # large, tightly clustered roots (gap ~ 1e-5 of their size) are still simple
    model = ModelParams(1, 2, 1.8882329273385912, -1.1461630631239936, 0.587381064405184,
                        -1.5325430645004228, -1.8886591445376961, -0.31652681639319)
    label = BlockLabel(7)
    ref = [o.energy for o in oracle_states(model, label) if not o.leading_deficient]
    got = solve_bae(model, label)
    assert match_spectrum([s.energy for s in got], ref, tol=1e-8).complete()
