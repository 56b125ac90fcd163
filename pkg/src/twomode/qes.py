"""Schroedinger form of the second-order block operators.

Writing H = P d^2 + (Q + P'/2) d + R, the substitution x = +-int dz/sqrt(P)
and the gauge factor e^W with W = int Q/(2P) dz turn H psi = E psi into

    -psi~'' + V psi~ = -E psi~,    psi~ = e^{W} psi(z(x)),
    V = -R + Q'/2 - Q (P' - Q) / (4P).

Three shapes of P get closed forms:

    I          P = A z^2            z = exp(sqrt(A) x)
    II         P = A z^2 + 4 g z    z = (2g/A) (cosh(sqrt(A) x) - 1)
    II-sextic  P = 4 g z            z = g x^2

Everything else (the cubic P of the (2,2) model in particular) is only
sampled parametrically over z, with x(z) and W(z) by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal

from .diffop import DiffOperator, UnsupportedCaseError
from .polynomial import Polynomial

CASE_I = "I"
CASE_II = "II"
CASE_SEXTIC = "II-sextic"
CASE_III = "III"
CASE_GENERIC = "generic"

CLOSED_FORM_CASES = (CASE_I, CASE_II, CASE_SEXTIC)


class DomainError(ValueError):
    """P(z) is not positive on the requested interval, or x(z) is not monotone."""


@dataclass(frozen=True)
class NormalForm:
    P: Polynomial
    Q: Polynomial
    R: Polynomial

    def potential_z(self, z):
        """Rational-in-z potential V(z)."""
        z = np.asarray(z, dtype=float)
        P, Q = self.P(z), self.Q(z)
        dP, dQ = self.P.deriv()(z), self.Q.deriv()(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -self.R(z) + 0.5 * dQ - Q * (dP - Q) / (4.0 * P)

    @property
    def case(self) -> str:
        return classify(self)


def normal_form(op: DiffOperator) -> NormalForm:
    if op.order != 2:
        raise UnsupportedCaseError(
            f"operator of order {op.order}: only second-order operators map to Schroedinger form")
    P = op.p[2]
    return NormalForm(P=P, Q=op.p[1] - P.deriv() * 0.5, R=op.p[0])


def _coeffs(poly: Polynomial, n: int, rtol: float = 1e-14) -> np.ndarray:
    """First n coefficients with relative round-off flushed to zero."""
    c = np.zeros(n)
    raw = np.real(poly.coefficients)
    c[: min(n, raw.size)] = raw[:n]
    big = np.max(np.abs(raw)) if raw.size else 0.0
    c[np.abs(c) <= rtol * big] = 0.0
    return c


def classify(nf: NormalForm) -> str:
    if nf.P.degree > 3:
        return CASE_GENERIC
    p0, p1, p2, p3 = _coeffs(nf.P, 4)
    if p0 != 0.0:
        return CASE_GENERIC
    if p3 != 0.0:
        return CASE_III
    if p2 != 0.0 and p1 == 0.0:
        return CASE_I
    if p2 != 0.0:
        return CASE_II
    if p1 != 0.0:
        return CASE_SEXTIC
    return CASE_GENERIC


def case_constants(nf: NormalForm) -> dict:
    """Named constants of the closed-form cases, read back off (P, Q, R).

    Case I:  P = A z^2, Q = -g z^2 + (B - A) z + g, R = 2(l - 1) g z + D.
    Case II: P = A z^2 + 4 g z, Q = -g z^2 + (B - A) z + 2g(4 q1 - 1),
             R = g (2l - q1 - 1) z + D.
    """
    case = classify(nf)
    p = _coeffs(nf.P, 3)
    q = _coeffs(nf.Q, 3)
    rr = _coeffs(nf.R, 2)
    if case == CASE_I:
        A, g = p[2], -q[2]
        out = {"A": A, "g": g, "B": q[1] + A, "D": rr[0]}
        out["l"] = rr[1] / (2 * g) + 1 if g else float("nan")
        return out
    if case in (CASE_II, CASE_SEXTIC):
        A, g = p[2], p[1] / 4
        q1 = (q[0] / (2 * g) + 1) / 4
        return {"A": A, "g": g, "B": q[1] + A, "D": rr[0], "q1": q1,
                "l": (rr[1] / g + q1 + 1) / 2}
    return {}


# -- change of variable ------------------------------------------------------

def _check_positive(nf: NormalForm, z: np.ndarray, allow_edges: bool = True):
    vals = nf.P(z)
    interior = vals[1:-1] if allow_edges and vals.size > 2 else vals
    if np.any(~np.isfinite(vals)) or np.any(interior <= 0) or np.any(vals < 0):
        raise DomainError("P(z) must be positive on the open interval")


def default_anchor(nf: NormalForm, z: np.ndarray) -> float:
    case = classify(nf)
    if case == CASE_I:
        return 1.0
    if case in (CASE_II, CASE_SEXTIC):
        return 0.0
    return 0.5 * (float(np.min(z)) + float(np.max(z)))


def change_of_variable(nf: NormalForm, z, sign: int = 1, anchor: float | None = None,
                       closed_form: bool = True) -> np.ndarray:
    """x(z) = sign * int_anchor^z dy / sqrt(P(y)) on a grid of z values."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    z = np.asarray(z, dtype=float)
    _check_positive(nf, z)
    case = classify(nf)
    if anchor is None:
        anchor = default_anchor(nf, z)
    if closed_form and anchor == default_anchor(nf, z) and case in CLOSED_FORM_CASES:
        c = case_constants(nf)
        A, g = c["A"], c.get("g", 0.0)
        if case == CASE_I:
            return sign * np.log(z) / math.sqrt(A)
        if case == CASE_SEXTIC:
            return sign * math.copysign(1.0, g) * np.sqrt(z / g)
        u = 1 + A * z / (2 * g)
        if A > 0:
            return sign * math.copysign(1.0, g) * np.arccosh(u) / math.sqrt(A)
        return sign * math.copysign(1.0, g) * np.arccos(u) / math.sqrt(-A)
    lo, hi = float(np.min(z)), float(np.max(z))
    if not lo <= anchor <= hi:
        # the anchor may sit on a simple zero of P (integrable endpoint)
        near = lo if anchor < lo else hi
        _check_positive(nf, np.linspace(anchor, near, 65))

    def integrand(y):
        return 1.0 / math.sqrt(nf.P(y))

    out = np.array([quad(integrand, anchor, zz, limit=200)[0] for zz in z])
    return sign * out


def z_of_x(nf: NormalForm, x, sign: int = 1) -> np.ndarray:
    """Closed-form inverse of change_of_variable (cases I, II, II-sextic)."""
    case = classify(nf)
    if case not in CLOSED_FORM_CASES:
        raise UnsupportedCaseError(f"no closed-form z(x) for case {case}; sample over z instead")
    x = np.asarray(x, dtype=float)
    c = case_constants(nf)
    A, g = c["A"], c["g"]
    if case == CASE_I:
        if A <= 0:
            raise DomainError("case I needs A > 0")
        return np.exp(sign * math.sqrt(A) * x)
    if case == CASE_SEXTIC:
        return g * x * x
    if A > 0:
        return (2 * g / A) * (np.cosh(math.sqrt(A) * x) - 1)
    return (2 * g / A) * (np.cos(math.sqrt(-A) * x) - 1)


# -- gauge function ------------------------------------------------------------

def gauge_function(nf: NormalForm, z, anchor: float | None = None) -> np.ndarray:
    """W(z) = int Q/(2P) dz (closed forms for I and II, quadrature otherwise).

    In the closed forms the logarithms use |z| and the additive constant is
    dropped, which only rescales psi~.
    """
    z = np.asarray(z, dtype=float)
    case = classify(nf)
    q = _coeffs(nf.Q, 3)
    if nf.Q.degree <= 2 and case in CLOSED_FORM_CASES:
        p = _coeffs(nf.P, 3)
        with np.errstate(divide="ignore"):
            logz = np.log(np.abs(z))

        def log_term(coef):
            return coef * logz if coef else np.zeros_like(z)

        if case == CASE_I:
            A = p[2]
            return (q[2] * z + log_term(q[1]) - q[0] / z) / (2 * A)
        if case == CASE_SEXTIC:
            g4 = p[1]
            return (0.5 * q[2] * z * z + q[1] * z + log_term(q[0])) / (2 * g4)
        A = p[2]
        beta = p[1] / A
        a = q[0] / beta
        b = (q[1] - q[2] * beta) - a
        with np.errstate(divide="ignore"):
            return (q[2] * z + log_term(a) + b * np.log(np.abs(z + beta))) / (2 * A)
    if anchor is None:
        anchor = default_anchor(nf, z)

    def integrand(y):
        return nf.Q(y) / (2.0 * nf.P(y))

    return np.array([quad(integrand, anchor, zz, limit=200)[0] for zz in z])


def _log_power(nf: NormalForm) -> float:
    """Exponent k of the |z|^k factor in e^W for cases II and II-sextic."""
    p = _coeffs(nf.P, 3)
    q = _coeffs(nf.Q, 3)
    return q[0] / (2 * p[1])


# -- potentials ----------------------------------------------------------------

def closed_form_potential(case: str, c: dict, x, sign: int = 1) -> np.ndarray:
    """The printed closed-form potentials as functions of x."""
    x = np.asarray(x, dtype=float)
    A, g, B, D, l = c["A"], c["g"], c["B"], c["D"], c["l"]
    if case == CASE_I:
        a = math.sqrt(A)
        xs = sign * x
        return (g * g / (2 * A) * np.cosh(2 * a * xs) + g * (2 - B / A) * np.sinh(a * xs)
                - (2 * l - 1) * g * np.exp(a * xs) - D + ((A - B) ** 2 - 2 * g * g) / (4 * A))
    if case == CASE_SEXTIC:
        q1 = c["q1"]
        return (g**4 / 16 * x**6 - g * g * B / 8 * x**4
                + (B * B + 8 * g * g * (1 - 4 * l)) / 16 * x**2 + q1 * B - D)
    if case == CASE_II:
        q1 = c["q1"]
        h = 0.5 * np.sqrt(A + 0j) * x
        sh2, ch2 = np.sinh(h) ** 2, np.cosh(h) ** 2
        th2 = sh2 / ch2
        # the bracket carries 2 (2A - B); with a single (2A - B) the hyperbolic
        # form disagrees with the rational one
        v = (g * g / A**2 * th2 * sh2 * (4 * g * g / A * sh2 + 2 * (2 * A - B))
             + ((A - B) * (3 * A - B) + 8 * g * g * (1 - 2 * q1)) / (4 * A) * th2
             - 4 * (2 * l - q1) * g * g / A * sh2
             + ((3 - 8 * q1) * A + (4 * q1 - 2) * B) / (4 * ch2)
             + (B - A) / 2 - D)
        return np.real(v)
    raise UnsupportedCaseError(f"no closed-form potential for case {case}")


@dataclass
class SampledPotential:
    z: np.ndarray
    x: np.ndarray
    V: np.ndarray
    W: np.ndarray
    sign: int
    case: str
    constants: dict = field(default_factory=dict)
    nf: NormalForm | None = None
    metadata: dict = field(default_factory=dict)

    def potential(self, x) -> np.ndarray:
        """V at arbitrary x; needs a closed-form case."""
        return closed_form_potential(self.case, self.constants, x, self.sign)


def gauge_and_potential(nf: NormalForm, z=None, *, x=None, sign: int = 1,
                        anchor: float | None = None) -> SampledPotential:
    """Sample (x, V, W) either over a z grid or, for closed-form cases, an x grid."""
    if (z is None) == (x is None):
        raise ValueError("give exactly one of z or x")
    case = classify(nf)
    consts = case_constants(nf)
    meta = {}
    if case == CASE_III:
        meta["note"] = ("z(x) is a shifted Weierstrass elliptic function of x; "
                        "sampled parametrically over z")
    if x is not None:
        x = np.asarray(x, dtype=float)
        z = z_of_x(nf, x, sign)
        V = closed_form_potential(case, consts, x, sign)
    else:
        z = np.asarray(z, dtype=float)
        x = change_of_variable(nf, z, sign, anchor)
        dx = np.diff(x)
        if x.size > 1 and not (np.all(dx > 0) or np.all(dx < 0)):
            raise DomainError("x(z) is not strictly monotone on the grid")
        V = nf.potential_z(z)
    if not np.all(np.isfinite(V)):
        raise DomainError("potential is not finite on the grid")
    W = gauge_function(nf, z, anchor)
    return SampledPotential(z=z, x=x, V=V, W=W, sign=sign, case=case,
                            constants=consts, nf=nf, metadata=meta)


def transformed_wavefunction(nf: NormalForm, psi: Polynomial, x, sign: int = 1) -> np.ndarray:
    """psi~(x) = e^{W(z(x))} psi(z(x)) for the closed-form cases.

    For cases II the factor |z|^k (k = 0 or 1/2) is continued through x = 0
    as |x|^{2k} sgn(x)^{2k}, which keeps the odd states smooth.
    """
    x = np.asarray(x, dtype=float)
    case = classify(nf)
    z = z_of_x(nf, x, sign)
    if case == CASE_I:
        W = gauge_function(nf, z)
        return np.exp(W) * psi(z)
    k = _log_power(nf)
    p = _coeffs(nf.P, 3)
    q = _coeffs(nf.Q, 3)
    if case == CASE_SEXTIC:
        rest = (0.5 * q[2] * z * z + q[1] * z) / (2 * p[1])
    else:
        A = p[2]
        beta = p[1] / A
        a = q[0] / beta
        b = (q[1] - q[2] * beta) - a
        rest = (q[2] * z + b * np.log(np.abs(z + beta))) / (2 * A)
    mag = np.abs(z) ** k
    if abs(2 * k - round(2 * k)) < 1e-12 and round(2 * k) % 2 == 1:
        mag = mag * np.sign(x)
    return mag * np.exp(rest) * psi(z)


# -- numerical checks ------------------------------------------------------------

def fd_eigenvalues(V, h: float, lo: float, hi: float) -> np.ndarray:
    """Dirichlet three-point eigenvalues of -d^2/dx^2 + V in [lo, hi]."""
    V = np.asarray(V, dtype=float)
    d = 2.0 / h**2 + V
    e = np.full(V.size - 1, -1.0 / h**2)
    return eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(lo, hi))


def _pick_half_width(pot_fn, top: float, margin: float, tunnel: float = 18.0,
                     start: float = 0.5, max_width: float = 1e3) -> float | None:
    """Smallest L (by doubling, then a WKB margin) with V(+-L) >= top + margin."""
    L = start
    while L <= max_width:
        if min(pot_fn(np.array([-L, L]))) >= top + margin:
            break
        L *= 1.25
    else:
        return None
    # stretch until the barrier integral sqrt(V - top) beyond the turning points is large
    for _ in range(60):
        xs = np.linspace(0, L, 2001)
        ok = True
        for side in (1, -1):
            v = pot_fn(side * xs) - top
            k = np.sqrt(np.clip(v, 0, None))
            above = v > 0
            # integral over the last connected classically forbidden stretch
            last = np.flatnonzero(~above)
            start_i = last[-1] + 1 if last.size else 0
            if np.trapezoid(k[start_i:], xs[start_i:]) < tunnel:
                ok = False
        if ok:
            return L
        L *= 1.1
    return L


@dataclass
class EquivalenceReport:
    checkable: bool
    note: str = ""
    half_width: float = float("nan")
    n_points: int = 0
    tol: float = 1e-3
    rows: list = field(default_factory=list)       # (E, nearest FD eigenvalue, rel err, match)
    refined_errors: list = field(default_factory=list)

    @property
    def all_match(self) -> bool:
        return self.checkable and all(r[3] for r in self.rows)

    @property
    def refinement_ratios(self) -> list:
        return [a / b if b > 0 else float("inf")
                for (_, _, a, _), b in zip(self.rows, self.refined_errors)]


def verify_spectral_equivalence(pot: SampledPotential, energies, n_points: int = 4000,
                                half_width: float | None = None, tol: float = 1e-3,
                                margin: float = 10.0, refine: bool = True) -> EquivalenceReport:
    """Check -E against a finite-difference spectrum of -d^2/dx^2 + V on [-L, L].

    Relative errors use max(1, |E|) so that states near zero energy are not
    judged on noise.  With ``refine`` the grid is doubled once and the
    errors recomputed (they should drop by about four).
    """
    energies = np.asarray(energies, dtype=float)
    rep = EquivalenceReport(checkable=False, n_points=n_points, tol=tol)
    if pot.case not in CLOSED_FORM_CASES:
        rep.note = f"case {pot.case}: potential only sampled over z, no grid eigensolve"
        return rep
    if energies.size == 0:
        rep.checkable, rep.note = True, "no energies"
        return rep
    targets = -energies
    top = float(np.max(targets))
    L = half_width or _pick_half_width(pot.potential, top, margin)
    if L is None:
        rep.note = "potential does not confine the requested energies"
        return rep
    ends = pot.potential(np.array([-L, L]))
    if min(ends) < max(np.max(np.abs(energies)), top) + margin:
        rep.note = "potential does not reach max|E| + margin at the interval ends"
        return rep
    rep.checkable, rep.half_width = True, L

    def errors(n):
        h = 2 * L / (n + 1)
        xs = -L + h * np.arange(1, n + 1)
        pad = 1.0 + 0.05 * (np.ptp(targets) + max(1.0, np.max(np.abs(targets))))
        lam = fd_eigenvalues(pot.potential(xs), h, float(np.min(targets)) - pad, top + pad)
        out = []
        for t in targets:
            if lam.size == 0:
                out.append((float("nan"), float("inf")))
                continue
            j = int(np.argmin(np.abs(lam - t)))
            out.append((float(lam[j]), abs(lam[j] - t) / max(1.0, abs(t))))
        return out

    for E, (lam, err) in zip(energies, errors(n_points)):
        rep.rows.append((float(E), lam, err, bool(err <= tol)))
    if refine:
        rep.refined_errors = [err for _, err in errors(2 * n_points + 1)]
    return rep


def gauge_residual(nf: NormalForm, psi: Polynomial, energy: float, points, h: float,
                   sign: int = 1) -> float:
    """Max relative residual of -psi~'' + V psi~ + E psi~ with a central difference."""
    pts = np.asarray(points, dtype=float)
    case = classify(nf)
    consts = case_constants(nf)
    f0 = transformed_wavefunction(nf, psi, pts, sign)
    fp = transformed_wavefunction(nf, psi, pts + h, sign)
    fm = transformed_wavefunction(nf, psi, pts - h, sign)
    d2 = (fp - 2 * f0 + fm) / h**2
    V = closed_form_potential(case, consts, pts, sign)
    res = -d2 + V * f0 + energy * f0
    scale = np.abs(d2) + np.abs(V * f0) + np.abs(energy * f0)
    return float(np.max(np.abs(res) / np.maximum(scale, np.finfo(float).tiny)))


def gauge_convergence(nf: NormalForm, psi: Polynomial, energy: float, points,
                      h0: float = 0.02, levels: int = 3, sign: int = 1) -> tuple[float, list]:
    """Log-log slope of the gauge residual against the number of grid cells.

    Halves h ``levels - 1`` times; a second-order scheme gives slope -2.
    """
    hs = [h0 / 2**k for k in range(levels)]
    res = [gauge_residual(nf, psi, energy, points, h, sign) for h in hs]
    slope = np.polyfit(np.log(1.0 / np.asarray(hs)), np.log(res), 1)[0]
    return float(slope), res
