"""Brute-force ground truth: Fock-basis block matrices and dense eigensolves.

Nothing here touches the algebraic or differential-operator machinery; the
block matrix is assembled from boson matrix elements
<N1+s, N2-r| a1^+^s a2^r |N1, N2> = sqrt((N1+s)!/N1!) sqrt(N2!/(N2-r)!).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .polynomial import Polynomial
from .repkit import BlockLabel, ModelParams

OCCUPATION_CAP = 170
DEFICIENCY_THRESHOLD = 1e-10


class CapacityError(RuntimeError):
    """Occupation numbers exceed the configured factorial cap."""


@dataclass
class OracleState:
    energy: float
    fock_vector: np.ndarray
    monomial_coeffs: np.ndarray
    roots: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    leading_deficient: bool = False


def _log_factorial(n):
    return gammaln(np.asarray(n, dtype=float) + 1.0)


def build_fock_hamiltonian(model: ModelParams, label: BlockLabel,
                           cap: int = OCCUPATION_CAP) -> np.ndarray:
    label.validate(model)
    s, r = model.s, model.r
    n = np.arange(label.M + 1)
    occ1 = s * n + label.delta1
    occ2 = r * (label.M - n) + label.delta2
    if max(occ1.max() + s, occ2.max() + r) > cap:
        raise CapacityError(f"occupations up to {max(occ1.max(), occ2.max())} exceed cap {cap}")
    o1 = occ1.astype(float)
    o2 = occ2.astype(float)
    H = np.diag(model.w1 * o1 + model.w2 * o2 + model.w11 * o1**2
                + model.w22 * o2**2 + 2 * model.w12 * o1 * o2)
    if label.M:
        a, b = occ1[:-1], occ2[:-1]
        logs = 0.5 * (_log_factorial(a + s) - _log_factorial(a)
                      + _log_factorial(b) - _log_factorial(b - r))
        off = model.g * np.exp(logs)
        idx = np.arange(label.M)
        H[idx + 1, idx] = off
        H[idx, idx + 1] = off
    return H


def diagonalize_block(matrix: np.ndarray) -> list[tuple[float, np.ndarray]]:
    """Ascending (energy, unit eigenvector) pairs; first nonzero entry positive."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(matrix, matrix.T):
        raise ValueError("diagonalize_block needs an exactly symmetric matrix")
    vals, vecs = np.linalg.eigh(matrix)
    out = []
    for k in range(len(vals)):
        v = vecs[:, k]
        nz = np.flatnonzero(np.abs(v) > 1e-14 * np.max(np.abs(v)))
        if nz.size and v[nz[0]] < 0:
            v = -v
        out.append((float(vals[k]), v.copy()))
    return out


def fock_norms_log(model: ModelParams, label: BlockLabel) -> np.ndarray:
    """log sqrt(N1(n)! N2(n)!) along the block."""
    occ1, occ2 = label.occupations(model)
    return 0.5 * (_log_factorial(occ1) + _log_factorial(occ2))


def eigenvector_to_polynomial(fock_vector, model: ModelParams, label: BlockLabel,
                              threshold: float = DEFICIENCY_THRESHOLD) -> tuple[Polynomial, bool]:
    """psi(z) = sum_n v_n z^n / sqrt(N1! N2!), made monic unless degree-deficient.

    Returns the polynomial and the deficiency flag.  A deficient vector is
    returned unscaled (apart from a max-norm normalization).
    """
    v = np.asarray(fock_vector, dtype=float)
    logn = fock_norms_log(model, label)
    # shift by the smallest norm so the exponentials stay in range
    coeffs = v * np.exp(-(logn - logn.min()))
    cmax = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if cmax == 0.0:
        return Polynomial(), True
    lead = coeffs[-1]
    if abs(lead) <= threshold * cmax:
        return Polynomial(coeffs / cmax), True
    return Polynomial(coeffs / lead), False


def polynomial_roots(poly: Polynomial) -> np.ndarray:
    """Companion-matrix roots of a monic polynomial, sorted by (Re, Im)."""
    c = np.asarray(poly.coefficients)
    if len(c) <= 1:
        return np.zeros(0, dtype=complex)
    c = c / c[-1]
    m = len(c) - 1
    comp = np.zeros((m, m), dtype=c.dtype)
    comp[1:, :-1] = np.eye(m - 1)
    comp[:, -1] = -c[:-1]
    roots = np.linalg.eigvals(comp).astype(complex)
    return sort_roots(roots)


def sort_roots(roots) -> np.ndarray:
    roots = np.asarray(roots, dtype=complex)
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


def oracle_states(model: ModelParams, label: BlockLabel,
                  threshold: float = DEFICIENCY_THRESHOLD) -> list[OracleState]:
    H = build_fock_hamiltonian(model, label)
    out = []
    for energy, vec in diagonalize_block(H):
        poly, deficient = eigenvector_to_polynomial(vec, model, label, threshold)
        roots = np.zeros(0, complex) if deficient else polynomial_roots(poly)
        out.append(OracleState(energy=energy, fock_vector=vec,
                               monomial_coeffs=poly.padded(label.dim()),
                               roots=roots, leading_deficient=deficient))
    return out


@dataclass
class OracleBetheReport:
    label: BlockLabel
    skipped: bool
    note: str = ""
    max_residual: float = 0.0
    max_energy_error: float = 0.0
    checked: int = 0
    deficient: int = 0
    per_state: list = field(default_factory=list)

    def ok(self, tol: float = 1e-8) -> bool:
        return self.skipped or (self.max_residual < tol and self.max_energy_error < tol)


def oracle_bethe_check(model: ModelParams, label: BlockLabel,
                       polish: bool = True) -> OracleBetheReport:
    """Feed oracle eigenvector roots through the Bethe equations and energy formula.

    With ``polish`` the companion roots get a few Newton steps on the Bethe
    equations first (rounding in the root extraction, not the equations, is
    what limits the raw residual).
    """
    from . import bethe

    if model.g == 0:
        return OracleBetheReport(label, skipped=True, note="g = 0: diagonal, exactly solvable")
    rep = OracleBetheReport(label, skipped=False)
    for st in oracle_states(model, label):
        if st.leading_deficient:
            rep.deficient += 1
            continue
        roots = st.roots
        if polish and label.M:
            roots = bethe.polish_roots(roots, model, label)
        res = bethe.scaled_residual(roots, model, label) if label.M else 0.0
        e = bethe.energy_from_roots(roots, model, label)
        err = abs(e - st.energy) / (1 + abs(st.energy))
        rep.per_state.append((st.energy, e, res))
        rep.max_residual = max(rep.max_residual, res)
        rep.max_energy_error = max(rep.max_energy_error, err)
        rep.checked += 1
    return rep
