"""The block Hamiltonian as a single-variable differential operator.

Under the Fock-Bargmann map a block state |n> becomes the monomial
z^n / sqrt(N1(n)! N2(n)!), and H turns into

    H = sum_{i=0..d} P_i(z) (d/dz)^i,   d = max(s, r, 2),

with polynomial coefficients P_i.  They are generated here from products
of shifted Euler operators (z d/dz + a_j), expanded through the identity
(z d/dz)^k = sum_i S(k, i) z^i d^i/dz^i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .polynomial import Polynomial
from .repkit import BlockLabel, ModelParams


class UnsupportedCaseError(ValueError):
    pass


@lru_cache(maxsize=None)
def stirling_L(k: int, i: int) -> int:
    """Coefficient of z^i d^i/dz^i in (z d/dz)^k.

    Evaluated from the explicit sum over n1 < ... < n_{k-i} <= k-1 of
    n1 (n2 - 1) ... (n_{k-i} - (k-i) + 1).
    """
    if not (isinstance(k, int) and isinstance(i, int)) or k < 1 or not 1 <= i <= k:
        raise IndexError(f"stirling_L needs 1 <= i <= k, got k={k}, i={i}")
    if i == k:
        return 1
    total = 0
    for ns in combinations(range(1, k), k - i):
        term = 1
        for j, n in enumerate(ns):
            term *= n - j
        total += term
    return total


def elementary_symmetric(a: Sequence) -> list:
    """e_0..e_m of the entries of ``a``; exact for Fraction/int input."""
    e = [1] + [0] * len(a)
    for x in a:
        for j in range(len(e) - 1, 0, -1):
            e[j] = e[j] + x * e[j - 1]
    return e


def expand_euler_product(a: Sequence) -> list:
    """Coefficients c_0..c_m with prod_j (z d/dz + a_j) = sum_i c_i z^i d^i/dz^i."""
    m = len(a)
    if m == 0:
        raise ValueError("expand_euler_product needs at least one factor")
    e = elementary_symmetric(a)
    c = [e[m]]
    for i in range(1, m + 1):
        c.append(sum(e[m - k] * stirling_L(k, i) for k in range(i, m + 1)))
    return c


def lowering_shifts(model: ModelParams, label: BlockLabel) -> list[Fraction]:
    """A_j = q1 - ((j-1) s + 1)/s^2, j = 1..s."""
    s = model.s
    q1 = label.q1(model)
    return [q1 - Fraction((j - 1) * s + 1, s * s) for j in range(1, s + 1)]


def raising_shifts(model: ModelParams, label: BlockLabel) -> list[Fraction]:
    """B_j = -(2l - q1 - ((j-1) r + 1)/r^2), j = 1..r."""
    r = model.r
    q1 = label.q1(model)
    l2 = 2 * label.l(model)
    return [-(l2 - q1 - Fraction((j - 1) * r + 1, r * r)) for j in range(1, r + 1)]


@dataclass(frozen=True, eq=False)
class DiffOperator:
    """H = sum_i P_i(z) (d/dz)^i.

    ``exact`` optionally holds the same coefficients as Fractions (row i,
    column k: coefficient of z^k in P_i); when present, real polynomials are
    transformed in exact arithmetic so that invariant-subspace zeros are
    exact.
    """

    order: int
    p: tuple
    model: ModelParams | None = field(default=None, compare=False)
    label: BlockLabel | None = field(default=None, compare=False)
    exact: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.p) != self.order + 1:
            raise ValueError("need exactly order + 1 coefficient polynomials")

    def coefficient_table(self) -> np.ndarray:
        """Array T[i, k] = coefficient of z^k in P_i."""
        width = max(int(max(pi.degree, 0)) for pi in self.p) + 1
        return np.array([pi.padded(width) for pi in self.p])


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _number_operator_part(model: ModelParams, label: BlockLabel):
    """(c0, c1, c2) of the diagonal part as a quadratic in theta = z d/dz."""
    s, r = model.s, model.r
    q1 = label.q1(model)
    l2 = 2 * label.l(model)
    # N1 = s theta + a, N2 = -r theta + b
    a = s * q1 - Fraction(1, s)
    b = r * (l2 - q1) - Fraction(1, r)
    w1, w2, w11, w22, w12 = (_exact(model.w1), _exact(model.w2), _exact(model.w11),
                             _exact(model.w22), _exact(model.w12))
    c2 = w11 * s * s + w22 * r * r - 2 * w12 * s * r
    c1 = (w1 * s - w2 * r + 2 * w11 * s * a - 2 * w22 * r * b
          + 2 * w12 * (s * b - r * a))
    c0 = w1 * a + w2 * b + w11 * a * a + w22 * b * b + 2 * w12 * a * b
    return c0, c1, c2


def build_diffop(model: ModelParams, label: BlockLabel) -> DiffOperator:
    """Differential operator of H on the block ``label``."""
    label.validate(model)
    s, r = model.s, model.r
    g = _exact(model.g)
    d = model.order
    table = [[Fraction(0)] * (d + 2) for _ in range(d + 1)]

    low = expand_euler_product(lowering_shifts(model, label))
    if low[0] != 0:
        raise AssertionError("lowering product has a nonzero constant term")
    # g z^-1 prod_j s (theta + A_j)
    for i in range(1, s + 1):
        table[i][i - 1] += g * s**s * low[i]

    # g z prod_j r (2l - q1 - ... - theta) = g (-r)^r z prod_j (theta + B_j)
    high = expand_euler_product(raising_shifts(model, label))
    for i in range(0, r + 1):
        table[i][i + 1] += g * (-r) ** r * high[i]

    c0, c1, c2 = _number_operator_part(model, label)
    # theta^2 = z^2 d^2 + z d
    table[2][2] += c2 * stirling_L(2, 2)
    table[1][1] += c2 * stirling_L(2, 1) + c1
    table[0][0] += c0

    p = tuple(Polynomial([float(x) for x in row]) for row in table)
    exact = tuple(tuple(row) for row in table)
    return DiffOperator(order=d, p=p, model=model, label=label, exact=exact)


def _falling(n: int, i: int) -> int:
    out = 1
    for j in range(i):
        out *= n - j
    return out


def _apply_exact(table, coeffs) -> list:
    out = [Fraction(0)] * (len(coeffs) + len(table[0]))
    for n, cn in enumerate(coeffs):
        if cn == 0:
            continue
        for i, row in enumerate(table):
            if i > n:
                break
            f = cn * _falling(n, i)
            for k, t in enumerate(row):
                if t:
                    out[n - i + k] += t * f
    return out


def apply_diffop(op: DiffOperator, poly: Polynomial) -> Polynomial:
    """sum_i P_i poly^(i); exact when the operator carries an exact table."""
    c = poly.coefficients
    if op.exact is not None and c.dtype.kind == "f" and np.all(np.isfinite(c)):
        out = _apply_exact(op.exact, [Fraction(float(x)) for x in c])
        return Polynomial([float(x) for x in out])
    out = Polynomial()
    for i, pi in enumerate(op.p):
        if pi.is_zero():
            continue
        deriv = poly.deriv(i) if i else poly
        if deriv.is_zero():
            continue
        out = out + pi * deriv
    return out


def operator_matrix(op: DiffOperator, M: int, exact: bool = False):
    """D[m, n] = coefficient of z^m in H z^n, m, n = 0..M.

    With ``exact=True`` (requires an exact table) the Fractions are returned
    as a nested list instead of a float array.
    """
    if op.exact is not None:
        cols = []
        for n in range(M + 1):
            image = _apply_exact(op.exact, [0] * n + [Fraction(1)])
            if any(image[M + 1:]):
                raise AssertionError(f"H z^{n} leaves the invariant subspace")
            cols.append(image[: M + 1] + [Fraction(0)] * max(0, M + 1 - len(image)))
        rows = [[cols[n][m] for n in range(M + 1)] for m in range(M + 1)]
        if exact:
            return rows
        return np.array([[float(x) for x in row] for row in rows], dtype=float).reshape(M + 1, M + 1)
    if exact:
        raise ValueError("operator has no exact coefficient table")
    D = np.zeros((M + 1, M + 1))
    for n in range(M + 1):
        image = apply_diffop(op, Polynomial.monomial(n))
        if image.degree > M:
            raise AssertionError(f"H z^{n} leaves the invariant subspace")
        D[:, n] = image.padded(M + 1)
    return D


def normalized_matrix(op: DiffOperator, model: ModelParams, label: BlockLabel) -> np.ndarray:
    """Operator matrix in the orthonormal Fock basis of the block.

    The Fock state |n> corresponds to z^n / sqrt(N1(n)! N2(n)!), so the
    monomial-basis matrix is conjugated by that diagonal normalization.
    """
    D = operator_matrix(op, label.M)
    occ1, occ2 = label.occupations(model)
    norms = [math.factorial(int(a)) * math.factorial(int(b)) for a, b in zip(occ1, occ2)]
    dim = label.dim()
    out = np.zeros_like(D)
    for m in range(dim):
        for n in range(dim):
            if D[m, n] != 0.0:
                out[m, n] = D[m, n] * math.sqrt(Fraction(norms[m], norms[n]))
    return out


@dataclass
class LeadingTermReport:
    formula: list
    observed: list
    max_rel_error: float
    closure: float
    closure_exact: Fraction
    tol: float = 1e-12

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= self.tol and self.closure_exact == 0 and abs(self.closure) <= self.tol


def raising_prefactor(model: ModelParams, label: BlockLabel, m: int) -> Fraction:
    """prod_j r (2l - q1 - ((j-1) r + 1)/r^2 - m), exact."""
    r = model.r
    q1 = label.q1(model)
    l2 = 2 * label.l(model)
    out = Fraction(1)
    for j in range(1, r + 1):
        out *= r * (l2 - q1 - Fraction((j - 1) * r + 1, r * r) - m)
    return out


def leading_term_check(model: ModelParams, label: BlockLabel, tol: float = 1e-12) -> LeadingTermReport:
    """Compare the z^{m+1} coefficient of H z^m with its closed form."""
    op = build_diffop(model, label)
    formula, observed = [], []
    worst = 0.0
    for m in range(label.M + 1):
        expected = model.g * float(raising_prefactor(model, label, m))
        got = apply_diffop(op, Polynomial.monomial(m)).coef(m + 1)
        formula.append(expected)
        observed.append(float(got))
        scale = max(abs(expected), abs(got))
        if scale > 0:
            worst = max(worst, abs(got - expected) / scale)
    return LeadingTermReport(
        formula=formula,
        observed=observed,
        max_rel_error=worst,
        closure=observed[-1],
        closure_exact=raising_prefactor(model, label, label.M),
        tol=tol,
    )


def exact_zeros(model: ModelParams, label: BlockLabel) -> tuple[Fraction, Fraction]:
    """(prod_j A_j, raising prefactor at m = M); both vanish identically."""
    prod_a = Fraction(1)
    for a in lowering_shifts(model, label):
        prod_a *= a
    return prod_a, raising_prefactor(model, label, label.M)


# -- closed-form coefficient tables for the four worked cases ---------------

@dataclass
class CaseTable:
    case: str
    constants: dict
    p: tuple

    def as_operator(self, order: int) -> DiffOperator:
        polys = list(self.p) + [Polynomial()] * (order + 1 - len(self.p))
        return DiffOperator(order=order, p=tuple(polys))


# Printed constants that disagree with the operator built from first
# principles (and with the Fock matrix): name -> description of the fix.
ERRATA = {
    "G33": "w22 coefficient is 11 - 36 l + 18 q1, not 7 + 18 q1",
}


def case_coefficients(model: ModelParams, label: BlockLabel, corrected: bool = False) -> CaseTable:
    """Named constants and P_i polynomials of the (1,1), (2,1), (2,2), (3,3) models.

    The tables are reproduced as printed; ``corrected=True`` applies the
    fixes listed in ``ERRATA``.
    """
    label.validate(model)
    key = (model.s, model.r)
    q1 = float(label.q1(model))
    l = float(label.l(model))
    w1, w2, w11, w22, w12, g = (model.w1, model.w2, model.w11, model.w22,
                                model.w12, model.g)
    if key == (1, 1):
        A = w11 + w22 - 2 * w12
        B = w1 - w2 + w11 + (5 - 4 * l) * w22 + (4 * l - 6) * w12
        D = 2 * (l - 1) * w2 + 4 * (l - 1) ** 2 * w22
        consts = {"A11": A, "B11": B, "D11": D}
        p = (Polynomial([D, 2 * (l - 1) * g]),
             Polynomial([g, B, -g]),
             Polynomial([0, 0, A]))
        return CaseTable("A", consts, p)
    if key == (2, 1):
        A = 4 * w11 + w22 - 4 * w12
        B = (2 * w1 - w2 + 2 * w11 * (1 + 4 * q1) + w22 * (3 + 2 * q1 - 4 * l)
             + w12 * (-7 - 8 * q1 + 8 * l))
        D = (2 * w1 * (q1 - 0.25) + w2 * (2 * l - q1 - 1)
             + 4 * w11 * (q1 - 0.25) ** 2 + w22 * (2 * l - 1 - q1) ** 2
             + 4 * w12 * (q1 - 0.25) * (2 * l - 1 - q1))
        consts = {"A21": A, "B21": B, "D21": D}
        p = (Polynomial([D, g * (2 * l - q1 - 1)]),
             Polynomial([8 * g * q1, B, -g]),
             Polynomial([0, 4 * g, A]))
        return CaseTable("B", consts, p)
    if key == (2, 2):
        A = w11 + w22 - 2 * w12
        B = 8 * g * (1 + q1 - 2 * l)
        D = (2 * w1 - 2 * w2 + 2 * w11 * (1 + 4 * q1) + 2 * w22 * (3 - 8 * l + 4 * q1)
             + 8 * w12 * (-1 - 2 * q1 + 2 * l))
        F = 4 * g * (2 * l - q1 - 0.25) * (2 * l - q1 - 0.75)
        G = (2 * w1 * (q1 - 0.25) + 2 * w2 * (2 * l - q1 - 0.25)
             + 4 * w11 * (q1 - 0.25) ** 2
             + 8 * w12 * (q1 - 0.25) * (2 * l - q1 - 0.25)
             + 4 * w22 * (2 * l - q1 - 0.25) ** 2)
        consts = {"A22": A, "B22": B, "D22": D, "F22": F, "G22": G}
        p = (Polynomial([G, F]),
             Polynomial([8 * g * q1, D, B]),
             Polynomial([0, 4 * g, 4 * A, 4 * g]))
        return CaseTable("C", consts, p)
    if key == (3, 3):
        A = 9 * g * (18 * l - 9 * q1 - 13)
        B = 9 * (w11 + w22 - 2 * w12)
        D = 9 * g * (9 * q1 + 5)
        F = 9 * g * (-36 * l**2 - 76 / 9 + 34 * l + 36 * l * q1 - 9 * q1**2 - 17 * q1)
        G = (3 * w1 - 3 * w2 + w11 * (7 + 18 * q1) + 2 * w12 * (-9 - 18 * q1 + 18 * l)
             + w22 * ((11 - 36 * l + 18 * q1) if corrected else (7 + 18 * q1)))
        K = 9 * g * (q1 + 9 * q1**2 + 4 / 9)
        R = 27 * g * (2 * l - q1 - 1 / 9) * (2 * l - q1 - 4 / 9) * (2 * l - q1 - 7 / 9)
        u = q1 - 1 / 9
        v = 2 * l - q1 - 1 / 9
        S = (9 * w11 * u**2 + 9 * w22 * v**2 + 18 * w12 * u * v
             + 3 * w1 * u + 3 * w2 * v)
        consts = {"A33": A, "B33": B, "D33": D, "F33": F, "G33": G, "K33": K,
                  "R33": R, "S33": S}
        p = (Polynomial([S, R]),
             Polynomial([K, G, F]),
             Polynomial([0, D, B, A]),
             Polynomial([0, 0, 27 * g, 0, -27 * g]))
        return CaseTable("D", consts, p)
    raise UnsupportedCaseError(f"no closed-form table for (s, r) = {key}")
