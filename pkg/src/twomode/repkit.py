"""Polynomial-algebra representations and block Hamiltonian matrices.

The two-mode Hamiltonian

    H = sum_i w_i N_i + sum_ij w_ij N_i N_j + g (a1^+^s a2^r + a1^s a2^+^r)

conserves K = r N1 + s N2, so it splits into finite blocks.  A block is
labelled by integers (M, delta1, delta2) and spanned by the Fock states

    |s n + delta1, r (M - n) + delta2>,   n = 0..M.

Inside a block the generators Q0, Q+, Q- of the deformed su(2) algebra act
as (M+1)x(M+1) matrices, and H is tridiagonal in them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np


class InvalidDegreeError(ValueError):
    """Mode degree k (or s, r) is not a positive integer."""


class InvalidWeightError(ValueError):
    """Bargmann index q is not one of the allowed lowest weights."""


class InvalidBlockError(ValueError):
    """Block label (M, delta1, delta2) is out of range for the model."""


def _check_degree(k) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidDegreeError(f"degree must be a positive integer, got {k!r}")
    return int(k)


@dataclass(frozen=True)
class ModelParams:
    """Mode degrees and couplings of the two-mode Hamiltonian.

    ``w12`` is the symmetric cross coupling, entering H as ``2 w12 N1 N2``.
    """

    s: int
    r: int
    w1: float = 0.0
    w2: float = 0.0
    w11: float = 0.0
    w22: float = 0.0
    w12: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        _check_degree(self.s)
        _check_degree(self.r)
        for name in ("w1", "w2", "w11", "w22", "w12", "g"):
            value = getattr(self, name)
            if not math.isfinite(float(value)):
                raise ValueError(f"coupling {name} must be finite, got {value!r}")

    @property
    def order(self) -> int:
        """Order of the single-variable differential realization."""
        return max(self.s, self.r, 2)

    def couplings(self) -> dict:
        return {k: getattr(self, k) for k in ("w1", "w2", "w11", "w22", "w12", "g")}

    def with_couplings(self, **kw) -> "ModelParams":
        fields = {"s": self.s, "r": self.r, **self.couplings()}
        fields.update(kw)
        return ModelParams(**fields)


@dataclass(frozen=True, order=True)
class BlockLabel:
    """Integer label of an invariant block; q1, q2 and l are derived exactly."""

    M: int
    delta1: int = 0
    delta2: int = 0

    def validate(self, model: ModelParams) -> "BlockLabel":
        if self.M < 0:
            raise InvalidBlockError(f"M must be nonnegative, got {self.M}")
        if not 0 <= self.delta1 < model.s:
            raise InvalidBlockError(f"delta1={self.delta1} not in [0, {model.s})")
        if not 0 <= self.delta2 < model.r:
            raise InvalidBlockError(f"delta2={self.delta2} not in [0, {model.r})")
        return self

    def q1(self, model: ModelParams) -> Fraction:
        return Fraction(1, model.s**2) + Fraction(self.delta1, model.s)

    def q2(self, model: ModelParams) -> Fraction:
        return Fraction(1, model.r**2) + Fraction(self.delta2, model.r)

    def l(self, model: ModelParams) -> Fraction:  # noqa: E743
        return (self.M + self.q1(model) + self.q2(model)) / 2

    def dim(self) -> int:
        return self.M + 1

    def charge(self, model: ModelParams) -> int:
        return model.r * model.s * self.M + model.r * self.delta1 + model.s * self.delta2

    def occupations(self, model: ModelParams) -> tuple[np.ndarray, np.ndarray]:
        n = np.arange(self.M + 1)
        return model.s * n + self.delta1, model.r * (self.M - n) + self.delta2


@dataclass(frozen=True)
class RepMatrices:
    q0: np.ndarray
    qp: np.ndarray
    qm: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    h: np.ndarray


def allowed_q(k: int) -> list[Fraction]:
    """Lowest weights (j k + 1)/k^2, j = 0..k-1, in increasing order."""
    k = _check_degree(k)
    return [Fraction(j * k + 1, k * k) for j in range(k)]


def structure_poly(k: int, x):
    """phi^(k)(x) = -prod_i (x + i/k - 1/k^2) + prod_i ((i-k)/k - 1/k^2).

    Exact for rational ``x``; otherwise evaluated in floating point.
    """
    k = _check_degree(k)
    shift = Fraction(1, k * k)
    first = 1
    second = 1
    for i in range(1, k + 1):
        first = first * (x + Fraction(i, k) - shift)
        second = second * (Fraction(i - k, k) - shift)
    return -first + second


def _as_fraction(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, (int, np.integer)):
        return Fraction(int(q))
    return Fraction(q).limit_denominator(10**6)


def su11_squares(k: int, q, n: int) -> tuple[Fraction, Fraction]:
    """Exact squares of the raising/lowering matrix elements on |q, n>."""
    k = _check_degree(k)
    qf = _as_fraction(q)
    if qf not in allowed_q(k):
        raise InvalidWeightError(f"q={q} is not an allowed weight for k={k}")
    kk = k * k
    up = Fraction(1)
    down = Fraction(1)
    for i in range(1, k + 1):
        up *= n + qf + Fraction(i * k - 1, kk)
        down *= n + qf - Fraction((i - 1) * k + 1, kk)
    return up, down


def su11_matrix_elements(k: int, q, n: int) -> tuple[float, float, float]:
    """Return (Q0 eigenvalue, <n+1|Q+|n>, <n-1|Q-|n>) on the state |q, n>."""
    up2, down2 = su11_squares(k, q, n)
    qf = _as_fraction(q)
    return float(qf + n), math.sqrt(up2), math.sqrt(down2)


def block_from_quanta(model: ModelParams, n1: int, n2: int) -> tuple[BlockLabel, int]:
    """Locate the Fock state |n1, n2> as index n of its invariant block."""
    if n1 < 0 or n2 < 0:
        raise ValueError("occupations must be nonnegative")
    d1 = n1 % model.s
    d2 = n2 % model.r
    n = (n1 - d1) // model.s
    M = n + (n2 - d2) // model.r
    return BlockLabel(M, d1, d2), n


def block_states(model: ModelParams, label: BlockLabel) -> list[tuple[int, int]]:
    label.validate(model)
    n1, n2 = label.occupations(model)
    return [(int(a), int(b)) for a, b in zip(n1, n2)]


def blocks_with_charge(model: ModelParams, K: int) -> list[BlockLabel]:
    """All block labels whose conserved charge r N1 + s N2 equals K."""
    out = []
    rs = model.r * model.s
    for d1 in range(model.s):
        for d2 in range(model.r):
            rest = K - model.r * d1 - model.s * d2
            if rest >= 0 and rest % rs == 0:
                out.append(BlockLabel(rest // rs, d1, d2))
    return sorted(out)


def raising_squares(model: ModelParams, label: BlockLabel) -> list[Fraction]:
    """Exact squares of <n+1|calQ+|n> for n = 0..M-1."""
    s, r = model.s, model.r
    q1 = label.q1(model)
    l2 = 2 * label.l(model)
    out = []
    for n in range(label.M):
        val = Fraction(1)
        for i in range(1, r + 1):
            val *= l2 - q1 - n - Fraction(r * (i - 1) + 1, r * r)
        for j in range(1, s + 1):
            val *= n + q1 + Fraction(j * s - 1, s * s)
        out.append(val)
    return out


def lowering_squares(model: ModelParams, label: BlockLabel) -> list[Fraction]:
    """Exact squares of <n-1|calQ-|n> for n = 1..M."""
    s, r = model.s, model.r
    q1 = label.q1(model)
    l2 = 2 * label.l(model)
    out = []
    for n in range(1, label.M + 1):
        val = Fraction(1)
        for i in range(1, r + 1):
            val *= l2 - q1 - n + Fraction(i * r - 1, r * r)
        for j in range(1, s + 1):
            val *= n + q1 - Fraction((j - 1) * s + 1, s * s)
        out.append(val)
    return out


def diagonal_energy(model: ModelParams, n1, n2):
    """Number-operator part of H evaluated on occupations (n1, n2)."""
    return (
        model.w1 * n1
        + model.w2 * n2
        + model.w11 * n1 * n1
        + model.w22 * n2 * n2
        + 2 * model.w12 * n1 * n2
    )


def build_block_matrices(model: ModelParams, label: BlockLabel) -> RepMatrices:
    """Generators, number operators and H on one block, indexed by n = 0..M."""
    label.validate(model)
    dim = label.dim()
    q1 = label.q1(model)
    l = label.l(model)

    q0 = np.diag([float(q1 - l + n) for n in range(dim)])
    qp = np.zeros((dim, dim))
    qm = np.zeros((dim, dim))
    for n, sq in enumerate(raising_squares(model, label)):
        qp[n + 1, n] = math.sqrt(sq)
    for n, sq in enumerate(lowering_squares(model, label), start=1):
        qm[n - 1, n] = math.sqrt(sq)

    occ1, occ2 = label.occupations(model)
    n1 = np.diag(occ1.astype(float))
    n2 = np.diag(occ2.astype(float))
    diag = diagonal_energy(model, occ1.astype(float), occ2.astype(float))
    scale = math.sqrt(model.s**model.s * model.r**model.r)
    h = np.diag(diag) + model.g * scale * (qp + qm)
    return RepMatrices(q0=q0, qp=qp, qm=qm, n1=n1, n2=n2, h=h)


@dataclass
class CommutatorReport:
    q0_qp: float
    q0_qm: float
    qp_qm: float
    tol: float = 1e-10

    @property
    def max_deviation(self) -> float:
        return max(self.q0_qp, self.q0_qm, self.qp_qm)

    @property
    def ok(self) -> bool:
        return self.max_deviation <= self.tol


def two_mode_phi(model: ModelParams, q0: np.ndarray, l: float) -> np.ndarray:
    """phi^(s+r)(calQ0, L) for diagonal calQ0 and central L = l * 1."""
    s, r = model.s, model.r
    x = np.diag(q0).astype(float)
    out = -np.ones_like(x)
    for i in range(1, s + 1):
        out = out * (l + x + i / s - 1 / s**2)
    for j in range(1, r + 1):
        out = out * (l - (x + 1) + j / r - 1 / r**2)
    return np.diag(out)


def commutator_check(mats: RepMatrices, model: ModelParams, label: BlockLabel,
                     tol: float = 1e-10) -> CommutatorReport:
    """Max-abs deviations of the three defining commutation relations."""
    q0, qp, qm = mats.q0, mats.qp, mats.qm
    l = float(label.l(model))
    eye = np.eye(q0.shape[0])

    def comm(a, b):
        return a @ b - b @ a

    rhs = two_mode_phi(model, q0, l) - two_mode_phi(model, q0 - eye, l)
    return CommutatorReport(
        q0_qp=_maxabs(comm(q0, qp) - qp),
        q0_qm=_maxabs(comm(q0, qm) + qm),
        qp_qm=_maxabs(comm(qp, qm) - rhs),
        tol=tol,
    )


def _maxabs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def iter_blocks(model: ModelParams, max_M: int) -> Iterable[BlockLabel]:
    for d1 in range(model.s):
        for d2 in range(model.r):
            for M in range(max_M + 1):
                yield BlockLabel(M, d1, d2)
