"""Cross matrices M_k, Perron roots and positive resolvents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeEntry, NoConvergence, NotContractive, SpectralRadiusTooLarge
from .functionals import PsiFamily, apply_functional

MARGIN = 1e-9
NEG_TOL = 1e-10
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
NILPOTENT_SHIFT = 1e-14
NEUMANN_STAGES = 64
NEUMANN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CrossMatrix:
    """M_k = (phi_ki[psi_kj]); square, nonnegative."""

    entries: np.ndarray
    family: str = "lower"

    def __post_init__(self):
        M = np.asarray(self.entries, dtype=float)
        M = np.zeros((0, 0)) if M.size == 0 else np.atleast_2d(M)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"cross matrix must be square, got {M.shape}")
        if M.size and M.min() < -NEG_TOL:
            i, j = np.unravel_index(int(np.argmin(M)), M.shape)
            raise NegativeEntry(f"{self.family} cross matrix entry ({i},{j}) = {M[i, j]:.3g}")
        object.__setattr__(self, "entries", np.maximum(M, 0.0) if M.size else M)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ResolventVector:
    values: np.ndarray
    source: str
    neumann_gap: float = 0.0


def build_cross_matrix(family: str, psi: PsiFamily) -> CrossMatrix:
    entries = psi.family(family)
    n = len(entries)
    M = np.zeros((n, n))
    for i, row in enumerate(entries):
        for j, col in enumerate(entries):
            M[i, j] = apply_functional(row.functional, col.psi)
    return CrossMatrix(M, family)


def _closed_form(M: np.ndarray) -> float:
    if M.shape == (1, 1):
        return abs(float(M[0, 0]))
    p, q, r, s = M.ravel()
    disc = (p - s) ** 2 + 4.0 * q * r
    return 0.5 * (p + s + math.sqrt(max(disc, 0.0)))


def _power(M: np.ndarray, tol: float, max_iter: int) -> float:
    n = M.shape[0]
    x = np.ones(n) / n
    lo, hi = 0.0, math.inf
    for _ in range(max_iter):
        y = M @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = y / x
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * max(1.0, hi):
            return 0.5 * (lo + hi)
        lam = y.sum()
        if lam == 0.0:
            return 0.0
        # reducible matrices: the ratio interval need not close, the residual does
        if np.abs(y - lam * x).sum() <= tol * lam:
            return float(lam)
        x = y / lam
    raise NoConvergence(f"power iteration stalled; Collatz-Wielandt interval [{lo:.12g}, {hi:.12g}]",
                        interval=(lo, hi))


def spectral_radius(M) -> float:
    """Perron root of a nonnegative matrix.

    Closed form for sizes up to 2.  Otherwise power iteration on M + eps*I
    with Collatz-Wielandt bounds; if that stalls (periodic structure), the
    shift M + I is tried before giving up.
    """
    A = M.entries if isinstance(M, CrossMatrix) else np.atleast_2d(np.asarray(M, dtype=float))
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n <= 2:
        return _closed_form(A)
    eye = np.eye(n)
    try:
        return max(_power(A + NILPOTENT_SHIFT * eye, POWER_TOL, POWER_MAX_ITER) - NILPOTENT_SHIFT, 0.0)
    except NoConvergence:
        return max(_power(A + eye, POWER_TOL, POWER_MAX_ITER) - 1.0, 0.0)


@dataclass(frozen=True)
class C8Result:
    holds: bool
    r1: float
    r2: float
    threshold1: float
    margin1: float
    margin2: float


def check_C8(M1: CrossMatrix, M2: CrossMatrix, c1: float) -> C8Result:
    """r(M_1) < 1/c_1 and r(M_2) < 1, each with a strict margin."""
    r1, r2 = spectral_radius(M1), spectral_radius(M2)
    t1 = 1.0 / c1
    m1, m2 = t1 - r1, 1.0 - r2
    return C8Result(bool(m1 > MARGIN and m2 > MARGIN), r1, r2, t1, m1, m2)


def neumann_sum(A: np.ndarray, rhs: np.ndarray, stages: int = NEUMANN_STAGES) -> np.ndarray:
    """sum_k A^k rhs by repeated squaring: S <- S + P S, P <- P^2."""
    n = A.shape[0]
    S, P = np.eye(n), A.copy()
    for _ in range(stages):
        S = S + P @ S
        P = P @ P
        if not np.any(P):
            break
        if np.abs(P).max() < 1e-300 or not np.isfinite(P).all():
            break
    return S @ rhs


def resolve_positive(M: CrossMatrix, scale: float, rhs, source: str = "") -> ResolventVector:
    """(I - scale*M)^{-1} rhs, checked positive and against the Neumann series."""
    rhs = np.asarray(rhs, dtype=float)
    A = scale * M.entries
    if M.dim == 0:
        return ResolventVector(rhs.copy(), source)
    r = spectral_radius(A)
    if r >= 1.0 - MARGIN:
        raise SpectralRadiusTooLarge(f"r({scale:g} M) = {r:.12g} >= 1", radius=r)
    x = np.linalg.solve(np.eye(M.dim) - A, rhs)
    if x.min() < -NEG_TOL:
        raise NegativeEntry(f"resolvent has negative component {x.min():.3g}")
    series = neumann_sum(A, rhs)
    gap = float(np.abs(series - x).max())
    scale_ref = max(1.0, float(np.abs(rhs).max()))
    if gap > NEUMANN_TOL * scale_ref:
        raise NoConvergence(f"direct and Neumann resolvents differ by {gap:.3g}", gap=gap)
    return ResolventVector(np.maximum(x, 0.0), source, gap)


def resolvent_lip_bound(q_star: float) -> float:
    """Lipschitz bound 1/(1 - q*) for (I - Q)^{-1}."""
    if not 0.0 <= q_star < 1.0:
        raise NotContractive(f"||Q||* = {q_star:.6g} is not below 1")
    return 1.0 / (1.0 - q_star)
