"""Bethe ansatz equations, energies and eigenfunctions for one block.

An eigenfunction of the block operator is psi(z) = prod_i (z - alpha_i)
with M roots.  Requiring H psi / psi to have no poles gives, for each p,

    sum_{i=1..d} i! P_i(alpha_p) e_{i-1}({1/(alpha_p - alpha_l)}_{l != p}) = 0,

where e_k is the k-th elementary symmetric polynomial (e_0 = 1).  The
energy follows from the z^M coefficient:

    E = H_diag(n = M) - g (r + delta2)!/delta2! * sum_i alpha_i.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from scipy.special import gammaln

from .diffop import DiffOperator, apply_diffop, build_diffop, normalized_matrix
from .polynomial import Polynomial
from .repkit import BlockLabel, ModelParams


class DegenerateConfigurationError(ValueError):
    """Two Bethe roots coincide; the simple-pole argument breaks down."""


class InconsistentRootSetError(ValueError):
    """The root set produces a complex energy."""


class InvalidStateError(ValueError):
    """Roots are not closed under complex conjugation."""


class IncompleteSpectrumWarning(UserWarning):
    pass


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iters: int = 200
    starts: int | None = None          # default 40 (M + 1)
    seed: int = 0
    oracle_seeding: bool = False
    root_scale: float | None = None
    max_halvings: int = 30
    degeneracy: float = 1e-7           # relative to root_scale
    dedup_tol: float = 1e-6
    divergence: float = 1e6            # relative to root_scale
    retries: int = 3
    batch: int | None = None
    strategy: str = "coefficients"     # or "roots": plain disk multistart

    def n_starts(self, M: int) -> int:
        return self.starts if self.starts is not None else 40 * (M + 1)


@dataclass
class BetheState:
    roots: np.ndarray
    energy: float
    residual_norm: float
    monomial_coeffs: np.ndarray
    pairing_index: int | None = None
    flags: list = field(default_factory=list)

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.monomial_coeffs)


# -- residuals and Jacobian --------------------------------------------------

def _coefficient_table(model: ModelParams, label: BlockLabel, op: DiffOperator | None):
    op = op or build_diffop(model, label)
    return op.coefficient_table(), op


def _polyval_rows(T: np.ndarray, z: np.ndarray):
    """Values and z-derivatives of every P_i at z (shape (..., d+1))."""
    d1, w = T.shape
    val = np.zeros(z.shape + (d1,), dtype=complex)
    der = np.zeros_like(val)
    for k in range(w - 1, -1, -1):
        der = der * z[..., None] + val
        val = val * z[..., None] + T[:, k]
    return val, der


def _inverse_gaps(alpha: np.ndarray) -> np.ndarray:
    """X[..., p, l] = 1/(alpha_p - alpha_l), zero on the diagonal."""
    diff = alpha[..., :, None] - alpha[..., None, :]
    M = alpha.shape[-1]
    eye = np.eye(M, dtype=bool)
    diff = np.where(eye, 1.0, diff)
    X = 1.0 / diff
    return np.where(eye, 0.0, X)


def _esym(X: np.ndarray, kmax: int) -> np.ndarray:
    """e_0..e_kmax of the rows of X (last axis), stacked on a new last axis."""
    out = np.zeros(X.shape[:-1] + (kmax + 1,), dtype=X.dtype)
    out[..., 0] = 1.0
    for l in range(X.shape[-1]):
        x = X[..., l]
        for j in range(kmax, 0, -1):
            out[..., j] = out[..., j] + x * out[..., j - 1]
    return out


def _bae_batch(alpha: np.ndarray, T: np.ndarray, jacobian: bool = True):
    """Residuals (K, M), scale (K, M) and optionally Jacobian (K, M, M)."""
    d = T.shape[0] - 1
    fact = np.array([math.factorial(i) for i in range(d + 1)], dtype=float)
    X = _inverse_gaps(alpha)
    E = _esym(X, d - 1)                                  # (K, M, d)
    Pv, Pd = _polyval_rows(T, alpha)                     # (K, M, d+1)
    Pv1, Pd1 = Pv[..., 1:], Pd[..., 1:]
    f = fact[1:]
    res = np.sum(f * Pv1 * E, axis=-1)
    Pabs, _ = _polyval_rows(np.abs(T), np.abs(alpha))
    scale = np.sum(f * Pabs.real[..., 1:] * _esym(np.abs(X), d - 1), axis=-1)
    if not jacobian:
        return res, scale, None
    M = alpha.shape[-1]
    J = np.zeros(alpha.shape + (M,), dtype=complex)
    if d >= 2:
        # leave-one-out e_j(X_p \ q), j = 0..d-2
        loo_prev = np.ones_like(X)
        X2 = X * X
        for j in range(0, d - 1):
            if j > 0:
                loo_prev = E[..., j][..., None] - X * loo_prev
            i = j + 2
            J = J + (fact[i] * Pv[..., i])[..., None] * X2 * loo_prev
    diag = np.sum(f * Pd1 * E, axis=-1) - np.sum(J, axis=-1)
    idx = np.arange(M)
    J[..., idx, idx] = diag
    return res, scale, J


def _check_distinct(roots: np.ndarray, threshold: float):
    if roots.size > 1:
        gaps = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= threshold:
            raise DegenerateConfigurationError(
                f"roots closer than {threshold:g} (min gap {gaps.min():.3g})")


def bae_residuals(roots, model: ModelParams, label: BlockLabel,
                  op: DiffOperator | None = None, threshold: float = 1e-12) -> np.ndarray:
    """Bethe equation residual for every root."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return np.zeros(0, dtype=complex)
    _check_distinct(roots, threshold)
    T, _ = _coefficient_table(model, label, op)
    res, _, _ = _bae_batch(roots[None, :], T, jacobian=False)
    return res[0]


def bae_jacobian(roots, model: ModelParams, label: BlockLabel,
                 op: DiffOperator | None = None, threshold: float = 1e-12) -> np.ndarray:
    """Analytic derivative d residual_p / d alpha_q."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return np.zeros((0, 0), dtype=complex)
    _check_distinct(roots, threshold)
    T, _ = _coefficient_table(model, label, op)
    _, _, J = _bae_batch(roots[None, :], T)
    return J[0]


def scaled_residual(roots, model: ModelParams, label: BlockLabel,
                    op: DiffOperator | None = None) -> float:
    """max_p |residual_p| / (sum of the magnitudes of its monomial terms)."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return 0.0
    T, _ = _coefficient_table(model, label, op)
    res, scale, _ = _bae_batch(roots[None, :], T, jacobian=False)
    return float(np.max(np.abs(res[0]) / np.maximum(scale[0], np.finfo(float).tiny)))


# -- energy and wavefunction --------------------------------------------------

def energy_prefactor(model: ModelParams, label: BlockLabel) -> Fraction:
    """prod_j r (q2 + 1 - ((j-1) r + 1)/r^2), which equals (r + delta2)!/delta2!."""
    r = model.r
    q2 = label.q2(model)
    out = Fraction(1)
    for j in range(1, r + 1):
        out *= r * (q2 + 1 - Fraction((j - 1) * r + 1, r * r))
    return out


def top_diagonal(model: ModelParams, label: BlockLabel) -> float:
    """Number-operator energy of the n = M state, from the block labels."""
    s, r = model.s, model.r
    q2 = label.q2(model)
    l2 = 2 * label.l(model)
    u = float(s * (l2 - q2) - Fraction(1, s))      # = s M + delta1
    v = float(r * q2 - Fraction(1, r))             # = delta2
    return (model.w11 * u * u + model.w22 * v * v + 2 * model.w12 * u * v
            + model.w1 * u + model.w2 * v)


def energy_from_roots(roots, model: ModelParams, label: BlockLabel, tol: float = 1e-8) -> float:
    roots = np.asarray(roots, dtype=complex)
    total = complex(np.sum(roots)) if roots.size else 0j
    e = top_diagonal(model, label) - model.g * float(energy_prefactor(model, label)) * total
    e = complex(e)
    if abs(e.imag) > tol * (1 + abs(e.real)):
        raise InconsistentRootSetError(f"energy has imaginary part {e.imag:.3g}")
    return float(e.real)


def is_conjugate_closed(roots, tol: float = 1e-8) -> bool:
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return True
    cost = np.abs(roots[:, None] - np.conj(roots)[None, :])
    rows, cols = linear_sum_assignment(cost)
    scale = 1 + np.abs(roots[rows])
    return bool(np.all(cost[rows, cols] <= tol * scale))


def wavefunction_from_roots(roots, tol: float = 1e-10) -> Polynomial:
    """Monic prod (z - alpha_i) with real coefficients."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return Polynomial([1.0])
    if not is_conjugate_closed(roots, tol=max(tol, 1e-8)):
        raise InvalidStateError("root set is not closed under conjugation")
    c = Polynomial.from_roots(roots).coefficients
    scale = np.maximum(1.0, np.abs(c))
    if np.any(np.abs(c.imag) > max(tol, 1e-8) * scale * roots.size):
        raise InvalidStateError("psi has non-negligible imaginary coefficients")
    out = np.zeros(roots.size + 1)
    out[: len(c)] = c.real
    out[-1] = 1.0
    return Polynomial(out)


# -- Newton machinery --------------------------------------------------------

def default_root_scale(op: DiffOperator) -> float:
    """1 + max(1, spread of coefficient ratios).

    Uses the ratios |P_i[k]| / |P_i[top]| of every coefficient polynomial,
    a Cauchy-type bound on where the coefficients balance.
    """
    ratios = [1.0]
    for pi in op.p[1:]:
        c = np.abs(pi.coefficients)
        if c.size < 2 or c[-1] == 0:
            continue
        top = c[-1]
        for k in range(c.size - 1):
            if c[k]:
                ratios.append((c[k] / top) ** (1.0 / (c.size - 1 - k)))
        low = np.flatnonzero(c)[0]
        for k in range(low + 1, c.size):
            if c[k]:
                ratios.append((c[low] / c[k]) ** (-1.0 / (k - low)))
    return 1.0 + max(1.0, max(ratios))


@dataclass
class _NewtonOutcome:
    roots: np.ndarray
    converged: np.ndarray
    residual: np.ndarray


def damped_newton(starts: np.ndarray, T: np.ndarray, cfg: SolverConfig, root_scale: float,
                  rng: np.random.Generator | None = None) -> _NewtonOutcome:
    """Batched damped Newton on the Bethe equations.

    Each row of ``starts`` is one configuration.  A step is halved while the
    residual 2-norm increases.  Iterates that collide are perturbed at most
    ``cfg.retries`` times; iterates that run off to infinity are dropped.
    """
    alpha = np.array(starts, dtype=complex)
    K, M = alpha.shape
    active = np.ones(K, dtype=bool)
    converged = np.zeros(K, dtype=bool)
    retries = np.zeros(K, dtype=int)
    final_res = np.full(K, np.inf)
    collide = cfg.degeneracy * root_scale
    blowup = cfg.divergence * root_scale
    tiny = np.finfo(float).tiny
    rng = rng or np.random.default_rng(0)

    for _ in range(cfg.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        a = alpha[idx]
        with np.errstate(all="ignore"):
            res, scale, J = _bae_batch(a, T)
        sres = np.max(np.abs(res) / np.maximum(scale, tiny), axis=-1)
        finite = np.all(np.isfinite(res), axis=-1) & np.all(np.isfinite(J), axis=(-1, -2))
        done = finite & (sres < cfg.tol)
        converged[idx[done]] = True
        final_res[idx[done]] = sres[done]
        active[idx[done | ~finite]] = False
        keep = finite & ~done
        idx, a, res, J = idx[keep], a[keep], res[keep], J[keep]
        if idx.size == 0:
            break
        step = _solve_steps(J, -res)
        bad = ~np.all(np.isfinite(step), axis=-1)
        active[idx[bad]] = False
        idx, a, res, step = idx[~bad], a[~bad], res[~bad], step[~bad]
        norm0 = np.linalg.norm(res, axis=-1)
        t = np.ones(idx.size)
        new = a + step
        pending = np.ones(idx.size, dtype=bool)
        for _h in range(cfg.max_halvings + 1):
            with np.errstate(all="ignore"):
                rnew, _, _ = _bae_batch(new[pending], T, jacobian=False)
            ok = np.all(np.isfinite(rnew), axis=-1) & (np.linalg.norm(rnew, axis=-1) < norm0[pending])
            where = np.flatnonzero(pending)
            pending[where[ok]] = False
            if not pending.any():
                break
            t[pending] *= 0.5
            new[pending] = a[pending] + t[pending, None] * step[pending]
        # no decrease even after all halvings: take the smallest step anyway
        alpha[idx] = new
        gaps = _min_gaps(new)
        big = np.max(np.abs(new), axis=-1) > blowup
        active[idx[big]] = False
        hit = (gaps < collide) & ~big
        for k in idx[hit]:
            if retries[k] >= cfg.retries:
                active[k] = False
                continue
            retries[k] += 1
            alpha[k] = alpha[k] + 1e-3 * root_scale * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    return _NewtonOutcome(alpha, converged, final_res)


def _solve_steps(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(J, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(rhs.shape, np.nan, dtype=complex)
        for k in range(J.shape[0]):
            try:
                out[k] = np.linalg.solve(J[k], rhs[k])
            except np.linalg.LinAlgError:
                pass
        return out


def _min_gaps(alpha: np.ndarray) -> np.ndarray:
    M = alpha.shape[-1]
    if M < 2:
        return np.full(alpha.shape[0], np.inf)
    d = np.abs(alpha[:, :, None] - alpha[:, None, :])
    d[:, np.arange(M), np.arange(M)] = np.inf
    return d.min(axis=(-1, -2))


def polish_roots(roots, model: ModelParams, label: BlockLabel, cfg: SolverConfig | None = None,
                 op: DiffOperator | None = None) -> np.ndarray:
    """Newton-refine one root configuration; returns the input if it fails."""
    cfg = cfg or SolverConfig()
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return roots
    T, op = _coefficient_table(model, label, op)
    scale = cfg.root_scale or max(default_root_scale(op), float(np.max(np.abs(roots))))
    out = damped_newton(roots[None, :], T, cfg, scale)
    cand = out.roots[0]
    if not np.all(np.isfinite(cand)):
        return roots
    # keep the better of start and result
    before = scaled_residual(roots, model, label, op)
    after = scaled_residual(cand, model, label, op)
    return cand if after <= before else roots


def _same_roots(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return bool(np.all(cost[rows, cols] <= tol * (1 + np.abs(a[rows]))))


def _make_state(roots: np.ndarray, model: ModelParams, label: BlockLabel, op: DiffOperator,
                residual: float) -> BetheState | None:
    roots = _symmetrize(roots)
    try:
        psi = wavefunction_from_roots(roots, tol=1e-8)
        e = energy_from_roots(roots, model, label)
    except (InvalidStateError, InconsistentRootSetError):
        return None
    flags = []
    if roots.size and np.any(np.abs(roots) < 1e-10):
        flags.append("zero-root")
    from .oracle import sort_roots
    return BetheState(roots=sort_roots(roots), energy=e, residual_norm=residual,
                      monomial_coeffs=psi.padded(label.dim()), flags=flags)


def _symmetrize(roots: np.ndarray) -> np.ndarray:
    """Average each root with the conjugate of its partner."""
    if roots.size == 0:
        return roots
    cost = np.abs(roots[:, None] - np.conj(roots)[None, :])
    rows, cols = linear_sum_assignment(cost)
    partner = np.empty(roots.size, dtype=int)
    partner[rows] = cols
    out = 0.5 * (roots + np.conj(roots[partner]))
    real = np.abs(out.imag) <= 1e-12 * (1 + np.abs(out.real))
    out[real] = out[real].real
    return out


def gershgorin_interval(H: np.ndarray) -> tuple[float, float]:
    rad = np.abs(H).sum(axis=1) - np.abs(np.diag(H))
    return float(np.min(np.diag(H) - rad)), float(np.max(np.diag(H) + rad))


def coefficient_newton(H: np.ndarray, v0: np.ndarray, e0: np.ndarray, tol: float = 1e-13,
                       max_iters: int = 60, max_halvings: int = 20):
    """Batched damped Newton on (H - E) v = 0 with the chart u.v = 1, u = v0.

    This is the Bethe system pulled back to the coefficients of psi (in
    the orthonormal Fock basis).  Returns (v, E, converged).
    """
    v = np.array(v0, dtype=float)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    u = v.copy()
    E = np.array(e0, dtype=float)
    K, n = v.shape
    eye = np.eye(n)
    hnorm = max(np.linalg.norm(H, 2), np.finfo(float).tiny)
    conv = np.zeros(K, dtype=bool)

    for _ in range(max_iters):
        F = _eigen_system(v, E, u, H)
        with np.errstate(all="ignore"):
            rel = np.linalg.norm(F[:, :n], axis=1) / (hnorm * np.linalg.norm(v, axis=1))
        conv = np.isfinite(rel) & (rel < tol)
        live = np.flatnonzero(~conv & np.all(np.isfinite(F), axis=1))
        if live.size == 0:
            break
        J = np.zeros((live.size, n + 1, n + 1))
        J[:, :n, :n] = H[None] - E[live, None, None] * eye
        J[:, :n, n] = -v[live]
        J[:, n, :n] = u[live]
        step = np.real(_solve_steps(J, -F[live]))
        f0 = np.linalg.norm(F[live], axis=1)
        t = np.ones(live.size)
        for _h in range(max_halvings):
            vn = v[live] + t[:, None] * step[:, :n]
            en = E[live] + t * step[:, n]
            with np.errstate(all="ignore"):
                fn = np.linalg.norm(_eigen_system(vn, en, u[live], H), axis=1)
            worse = ~(fn < f0)
            if not worse.any():
                break
            t[worse] *= 0.5
        v[live], E[live] = vn, en
    return v, E, conv


def _eigen_system(v, E, u, H):
    R = v @ H.T - E[:, None] * v
    c = np.einsum("ki,ki->k", u, v) - 1.0
    return np.concatenate([R, c[:, None]], axis=1)


def _fock_log_norms(model: ModelParams, label: BlockLabel) -> np.ndarray:
    occ1, occ2 = label.occupations(model)
    return 0.5 * (gammaln(occ1 + 1.0) + gammaln(occ2 + 1.0))


def _roots_from_fock(v: np.ndarray, logn: np.ndarray, threshold: float = 1e-10):
    """Companion roots of the monic psi for a Fock vector; None if degree-deficient."""
    from .oracle import polynomial_roots

    a = v * np.exp(-(logn - logn.min()))
    if not np.all(np.isfinite(a)) or abs(a[-1]) <= threshold * np.max(np.abs(a)):
        return None
    return polynomial_roots(Polynomial(a / a[-1]))


def _random_disk(rng: np.random.Generator, K: int, M: int, radius: float) -> np.ndarray:
    rad = radius * np.sqrt(rng.random((K, M)))
    ang = 2 * np.pi * rng.random((K, M))
    return rad * np.exp(1j * ang)


def solve_bae(model: ModelParams, label: BlockLabel, cfg: SolverConfig | None = None,
              seeds: list | None = None) -> list[BetheState]:
    """Accepted Bethe states of one block, ascending in energy.

    Multistart damped Newton from random complex starts; with
    ``cfg.oracle_seeding`` (or explicit ``seeds``) oracle roots are polished
    first.  Stops once M + 1 distinct states are found.
    """
    cfg = cfg or SolverConfig()
    label.validate(model)
    if model.g == 0:
        raise ValueError("g = 0 is exactly solvable; use the oracle path")
    op = build_diffop(model, label)
    M = label.M
    if M == 0:
        st = _make_state(np.zeros(0, complex), model, label, op, 0.0)
        return [st]
    T = op.coefficient_table()
    root_scale = cfg.root_scale or default_root_scale(op)
    states: list[BetheState] = []

    def absorb(out: _NewtonOutcome):
        for k in np.flatnonzero(out.converged):
            roots = out.roots[k]
            if any(_same_roots(roots, s.roots, cfg.dedup_tol) for s in states):
                continue
            if _min_gaps(roots[None, :])[0] < cfg.degeneracy * root_scale:
                continue
            st = _make_state(roots, model, label, op, float(out.residual[k]))
            if st is None:
                continue
            if any(abs(st.energy - s.energy) <= 1e-12 * (1 + abs(s.energy)) for s in states):
                continue
            states.append(st)
            if len(states) >= M + 1:
                return True
        return False

    if seeds is None and cfg.oracle_seeding:
        from .oracle import oracle_states
        seeds = [st.roots for st in oracle_states(model, label) if not st.leading_deficient]
    full = False
    if seeds:
        seed_arr = np.array([np.asarray(s, dtype=complex) for s in seeds])
        scale = max(root_scale, float(np.max(np.abs(seed_arr))))
        full = absorb(damped_newton(seed_arr, T, cfg, scale))

    if not full:
        rng = np.random.default_rng(cfg.seed)
        total = cfg.n_starts(M)
        batch = cfg.batch or max(8, 4 * (M + 1))
        if cfg.strategy == "coefficients":
            H = normalized_matrix(op, model, label)
            logn = _fock_log_norms(model, label)
            lo, hi = gershgorin_interval(H)
        elif cfg.strategy != "roots":
            raise ValueError(f"unknown strategy {cfg.strategy!r}")
        used = 0
        coincident: set = set()
        while used < total and not full:
            k = min(batch, total - used)
            used += k
            if cfg.strategy == "roots":
                starts = _random_disk(rng, k, M, root_scale)
                full = absorb(damped_newton(starts, T, cfg, root_scale, rng))
                continue
            v, _, ok = coefficient_newton(H, rng.standard_normal((k, M + 1)),
                                          rng.uniform(lo, hi, k))
            for j in np.flatnonzero(ok):
                roots = _roots_from_fock(v[j], logn)
                if roots is None:
                    continue
                if any(_same_roots(roots, st.roots, 1e-4) for st in states):
                    continue
                scale = max(root_scale, float(np.max(np.abs(roots))))
                out = damped_newton(roots[None, :], T, cfg, scale)
                full = absorb(out)
                tight = _min_gaps(roots[None, :])[0] < 1e-5 * max(1.0, float(np.max(np.abs(roots))))
                if tight and not out.converged[0]:
                    # most likely a multiple root, outside the simple-pole ansatz
                    coincident.add(round(float(v[j] @ H @ v[j] / (v[j] @ v[j])), 8))
                if full:
                    break
    if len(states) < M + 1:
        msg = f"block {label}: found {len(states)} of {M + 1} states"
        if not full and cfg.strategy == "coefficients" and coincident:
            msg += f"; {len(coincident)} eigenstate(s) have coincident roots"
        warnings.warn(msg, IncompleteSpectrumWarning, stacklevel=2)
    states.sort(key=lambda s: s.energy)
    return states


def eigen_residual(state: BetheState, model: ModelParams, label: BlockLabel,
                   op: DiffOperator | None = None) -> float:
    """max_k |(H psi - E psi)_k| / max_k |(H psi)_k, E psi_k|."""
    op = op or build_diffop(model, label)
    psi = state.polynomial
    hpsi = apply_diffop(op, psi)
    n = label.dim()
    a = hpsi.padded(max(n, len(hpsi.coefficients)))
    b = state.energy * psi.padded(len(a))
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)


def liouville_check(state: BetheState, model: ModelParams, label: BlockLabel, points,
                    op: DiffOperator | None = None) -> float:
    """Max relative deviation of (H psi)/psi from E at the given points."""
    op = op or build_diffop(model, label)
    psi = state.polynomial
    hpsi = apply_diffop(op, psi)
    z = np.asarray(points, dtype=complex)
    ratio = hpsi(z) / psi(z)
    return float(np.max(np.abs(ratio - state.energy)) / (1 + abs(state.energy)))


@dataclass
class PairingReport:
    pairs: list                  # (bethe_index, oracle_index, |dE|)
    unmatched_bethe: list
    unmatched_oracle: list
    duplicates: list
    max_delta: float

    def complete(self) -> bool:
        return not self.unmatched_oracle and not self.unmatched_bethe


def match_spectrum(bethe_energies, oracle_energies, tol: float | None = None) -> PairingReport:
    """Greedy minimal-|dE| pairing; independent of input order.

    With ``tol`` set, pairs with |dE|/(1+|E|) above it are left unmatched.
    """
    b = [float(x) for x in bethe_energies]
    o = [float(x) for x in oracle_energies]
    cand = []
    for i, eb in enumerate(b):
        for j, eo in enumerate(o):
            cand.append((abs(eb - eo), eb, eo, i, j))
    cand.sort(key=lambda c: c[:3])
    used_b, used_o, pairs = set(), set(), []
    for d, eb, eo, i, j in cand:
        if i in used_b or j in used_o:
            continue
        if tol is not None and d > tol * (1 + abs(eo)):
            continue
        used_b.add(i)
        used_o.add(j)
        pairs.append((i, j, d))
    dup = []
    order = sorted(range(len(b)), key=lambda i: b[i])
    for a_, c_ in zip(order, order[1:]):
        if abs(b[a_] - b[c_]) <= 1e-12 * (1 + abs(b[a_])):
            dup.append((a_, c_))
    pairs.sort(key=lambda p: (o[p[1]], b[p[0]]))
    return PairingReport(
        pairs=pairs,
        unmatched_bethe=sorted(set(range(len(b))) - used_b, key=lambda i: b[i]),
        unmatched_oracle=sorted(set(range(len(o))) - used_o, key=lambda j: o[j]),
        duplicates=dup,
        max_delta=max((p[2] for p in pairs), default=0.0),
    )
