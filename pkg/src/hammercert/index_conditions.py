"""Sufficient conditions for fixed point index 1 on K_rho and index 0 on V_rho.

Everything that does not depend on the nonlinearity (psi families, cross
matrices, resolvent vectors, the brackets multiplying the nonlinearity
bounds) is computed once per problem and memoised on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .cone import (
    MARGIN,
    CrossMatrix,
    ResolventVector,
    build_cross_matrix,
    check_C8,
    resolve_positive,
    spectral_radius,
)
from .errors import InternalInconsistency, SpectralRadiusTooLarge
from .functionals import H2_lip_bound, K_phi_integral, PsiFamily, build_psi
from .gridfunc import Mesh
from .problem import ProblemSpec
from .quadrature import (
    EXTREMUM_TOL,
    ExtremumRequest,
    chebyshev_lobatto,
    extremize,
)

GRID = 257
NONEXIST_T = 257
NONEXIST_U = np.logspace(-6.0, 6.0, 121)


@dataclass(frozen=True)
class Quantity:
    """A reported number together with the operation that produced it."""

    value: float
    source: str
    tol: float = 0.0


@dataclass(frozen=True)
class RhoWindow:
    """K_rho within V_rho within K_{rho/c}."""

    rho: float
    c: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.c <= 1:
            raise ValueError("c must lie in (0, 1]")

    @property
    def lower(self) -> float:
        return self.rho

    @property
    def upper(self) -> float:
        return self.rho / self.c


@dataclass
class ConditionResult:
    kind: str
    rho: float | None
    lhs: float
    threshold: float
    holds: bool
    constants: dict = field(default_factory=dict)
    advisory: bool = False
    notes: list = field(default_factory=list)

    @property
    def margin(self) -> float:
        """Signed distance to the threshold in the direction that certifies."""
        if self.kind in ("I1", "I1_strong", "nonexist_1", "eig_1"):
            return self.threshold - self.lhs
        return self.lhs - self.threshold


# ---------------------------------------------------------------------------
# f-independent structure


def psi_family(problem: ProblemSpec) -> PsiFamily:
    return problem.cache("psi", lambda: build_psi(problem))


def cross_matrices(problem: ProblemSpec) -> tuple[CrossMatrix, CrossMatrix]:
    def build():
        psi = psi_family(problem)
        return build_cross_matrix("lower", psi), build_cross_matrix("upper", psi)
    return problem.cache("cross", build)


def c8(problem: ProblemSpec):
    M1, M2 = cross_matrices(problem)
    return check_C8(M1, M2, problem.c1)


def window_mesh(problem: ProblemSpec) -> Mesh:
    def build():
        a, b = problem.window
        fixed = [p for p in problem.kernel.kinks if a < p < b]
        return Mesh.build(a, b, max(33, problem.mesh_nodes // 2 | 1), fixed)
    return problem.cache("window_mesh", build)


def sigma_values(problem: ProblemSpec, t) -> np.ndarray:
    """sigma(t) = int_0^1 |k(t,s)| g(s) ds by product integration."""
    k = problem.kernel
    t = np.atleast_1d(np.asarray(t, dtype=float))
    A = problem.mesh.product_matrix(k.abs_kernel, t, k.weight, k.diagonal_kink)
    return A.sum(axis=1)


def window_integral_values(problem: ProblemSpec, t) -> np.ndarray:
    """int_a^b k(t,s) g(s) ds."""
    k = problem.kernel
    t = np.atleast_1d(np.asarray(t, dtype=float))
    A = window_mesh(problem).product_matrix(k.evaluate, t, k.weight, k.diagonal_kink)
    return A.sum(axis=1)


def inv_m(problem: ProblemSpec) -> tuple[float, float]:
    """(argmax, 1/m) with 1/m = sup_t sigma(t)."""
    return problem.cache("inv_m", lambda: extremize(ExtremumRequest(
        lambda t: sigma_values(problem, t), (0.0, 1.0), "sup", seeds=problem.kernel.kinks)))


def inv_M(problem: ProblemSpec) -> tuple[float, float]:
    """(argmin, 1/M(a,b)) with 1/M(a,b) = inf over [a,b] of int_a^b k g."""
    a, b = problem.window
    return problem.cache("inv_M", lambda: extremize(ExtremumRequest(
        lambda t: window_integral_values(problem, t), (a, b), "inf", seeds=problem.kernel.kinks)))


def kphi_vector(problem: ProblemSpec, family: str) -> np.ndarray:
    """(int K_phi_j g)_j: over [0,1] for the upper family, over [a,b] for the lower."""
    def build():
        psi = psi_family(problem)
        entries = psi.family(family)
        lo, hi = (0.0, 1.0) if family == "upper" else problem.window
        return np.array([K_phi_integral(e.functional, problem.kernel, lo, hi) for e in entries])
    return problem.cache(("kphi", family), build)


def resolvent(problem: ProblemSpec, family: str) -> ResolventVector:
    """(I - M_2)^{-1} int_0^1 K_phi2 g, or (I - c1 M_1)^{-1} int_a^b K_phi1 g."""
    def build():
        M1, M2 = cross_matrices(problem)
        if family == "upper":
            return resolve_positive(M2, 1.0, kphi_vector(problem, "upper"), "int_0^1 K_phi2 g")
        return resolve_positive(M1, problem.c1, kphi_vector(problem, "lower"), "int_a^b K_phi1 g")
    return problem.cache(("resolvent", family), build)


def _psi_sum(entries, coeffs, t, absolute: bool) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    for e, w in zip(entries, coeffs):
        vals = e.psi(t)
        out = out + (np.abs(vals) if absolute else vals) * w
    return out


def I1_bracket(problem: ProblemSpec) -> tuple[float, float]:
    """sup_t [ sum_j |psi_2j(t)| res_j + sigma(t) ] as (arg, value)."""
    def build():
        entries = psi_family(problem).upper
        res = resolvent(problem, "upper").values

        def h(t):
            return _psi_sum(entries, res, t, True) + sigma_values(problem, t)
        a, b = problem.window
        return extremize(ExtremumRequest(h, (0.0, 1.0), "sup", seeds=(a, b, *problem.kernel.kinks)))
    return problem.cache("I1_bracket", build)


def I1_strong_bracket(problem: ProblemSpec) -> float:
    def build():
        entries = psi_family(problem).upper
        res = resolvent(problem, "upper").values
        return math.fsum(e.norm * r for e, r in zip(entries, res)) + inv_m(problem)[1]
    return problem.cache("I1_strong_bracket", build)


def I0_bracket(problem: ProblemSpec) -> tuple[float, float]:
    """inf over [a,b] of [ sum_j psi_1j(t) res_j + int_a^b k(t,s) g(s) ds ] as (arg, value)."""
    def build():
        entries = psi_family(problem).lower
        res = resolvent(problem, "lower").values
        a, b = problem.window

        def h(t):
            return _psi_sum(entries, res, t, False) + window_integral_values(problem, t)
        return extremize(ExtremumRequest(h, (a, b), "inf", seeds=problem.kernel.kinks))
    return problem.cache("I0_bracket", build)


def I0_strong_bracket(problem: ProblemSpec) -> float:
    def build():
        entries = psi_family(problem).lower
        res = resolvent(problem, "lower").values
        a, b = problem.window
        if entries:
            _, psi_part = extremize(ExtremumRequest(
                lambda t: _psi_sum(entries, res, t, False), (a, b), "inf"))
        else:
            psi_part = 0.0
        return psi_part + inv_M(problem)[1]
    return problem.cache("I0_strong_bracket", build)


# ---------------------------------------------------------------------------
# nonlinearity bounds


def _polish(fun2: Callable, box, starts, sign: float) -> float:
    best = None
    for x0 in starts:
        res = minimize(lambda x: sign * float(fun2(x[0], x[1])), x0, method="L-BFGS-B",
                       bounds=box, options={"ftol": 1e-15, "gtol": 1e-12})
        val = sign * float(res.fun)
        if best is None or sign * val < sign * best:
            best = val
    return best


def _grid_extremum(fun2: Callable, t_box, u_box, mode: str) -> float:
    t = chebyshev_lobatto(*t_box, GRID)
    u = chebyshev_lobatto(*u_box, GRID)
    T, U = np.meshgrid(t, u, indexing="ij")
    with np.errstate(all="ignore"):
        vals = np.asarray(fun2(T, U), dtype=float) * np.ones_like(T)
    sign = -1.0 if mode == "sup" else 1.0
    flat = sign * vals.ravel()
    flat = np.where(np.isnan(flat), np.inf, flat)
    order = np.argsort(flat, kind="stable")[:3]
    grid_best = sign * flat[order[0]]
    starts = [np.array([T.ravel()[i], U.ravel()[i]]) for i in order]
    polished = _polish(fun2, [t_box, u_box], starts, sign)
    if mode == "sup":
        return max(grid_best, polished)
    return min(grid_best, polished)


def f2_upper(problem: ProblemSpec, rho: float) -> Quantity:
    """f2^{-rho,rho} = sup of f2(t,u)/rho over [0,1] x [-rho, rho]."""
    decl = problem.declarations.f2_upper
    if decl is not None:
        return Quantity(float(decl(rho)), "analytic")
    val = _grid_extremum(problem.f2, (0.0, 1.0), (-rho, rho), "sup") / rho
    return Quantity(max(val, 0.0), "sampled", EXTREMUM_TOL)


def f1_lower(problem: ProblemSpec, rho: float) -> Quantity:
    """f_{1,rho,rho/c} = inf of f1(t,u)/rho over [a,b] x [rho, rho/c]."""
    decl = problem.declarations.f1_lower
    c = problem.c
    if decl is not None:
        return Quantity(float(decl(rho, c)), "analytic")
    val = _grid_extremum(problem.f1, problem.window, (rho, rho / c), "inf") / rho
    return Quantity(max(val, 0.0), "sampled", EXTREMUM_TOL)


# ---------------------------------------------------------------------------
# conditions


def _require_c8(problem: ProblemSpec, family: str) -> None:
    result = c8(problem)
    if family == "upper" and result.margin2 <= MARGIN:
        raise SpectralRadiusTooLarge(f"r(M_2) = {result.r2:.12g} is not below 1", radius=result.r2)
    if family == "lower" and result.margin1 <= MARGIN:
        raise SpectralRadiusTooLarge(
            f"r(M_1) = {result.r1:.12g} is not below 1/c1 = {result.threshold1:.12g}",
            radius=result.r1)


def _structure_constants(problem: ProblemSpec, family: str) -> dict:
    M1, M2 = cross_matrices(problem)
    if family == "upper":
        return {
            "r(M2)": Quantity(spectral_radius(M2), "spectral_radius", 1e-12),
            "resolvent_upper": [Quantity(float(v), "resolve_positive", 1e-10)
                                for v in resolvent(problem, "upper").values],
        }
    return {
        "r(M1)": Quantity(spectral_radius(M1), "spectral_radius", 1e-12),
        "resolvent_lower": [Quantity(float(v), "resolve_positive", 1e-10)
                            for v in resolvent(problem, "lower").values],
    }


def check_I1(problem: ProblemSpec, rho: float) -> ConditionResult:
    _require_c8(problem, "upper")
    bound = f2_upper(problem, rho)
    arg, bracket = I1_bracket(problem)
    lhs = bound.value * bracket
    consts = {"f2_upper": bound, "bracket_sup": Quantity(bracket, "extremize", EXTREMUM_TOL),
              "bracket_arg": Quantity(arg, "extremize", EXTREMUM_TOL),
              **_structure_constants(problem, "upper")}
    return ConditionResult("I1", rho, lhs, 1.0, lhs < 1.0 - MARGIN, consts,
                           advisory=bound.source == "sampled")


def check_I1_strong(problem: ProblemSpec, rho: float) -> ConditionResult:
    _require_c8(problem, "upper")
    bound = f2_upper(problem, rho)
    bracket = I1_strong_bracket(problem)
    lhs = bound.value * bracket
    consts = {"f2_upper": bound, "bracket": Quantity(bracket, "norm form", EXTREMUM_TOL),
              "1/m": Quantity(inv_m(problem)[1], "m_constant", EXTREMUM_TOL),
              **_structure_constants(problem, "upper")}
    return ConditionResult("I1_strong", rho, lhs, 1.0, lhs < 1.0 - MARGIN, consts,
                           advisory=bound.source == "sampled")


def check_I0(problem: ProblemSpec, rho: float) -> ConditionResult:
    _require_c8(problem, "lower")
    bound = f1_lower(problem, rho)
    arg, bracket = I0_bracket(problem)
    lhs = bound.value * bracket
    consts = {"f1_lower": bound, "bracket_inf": Quantity(bracket, "extremize", EXTREMUM_TOL),
              "bracket_arg": Quantity(arg, "extremize", EXTREMUM_TOL),
              **_structure_constants(problem, "lower")}
    return ConditionResult("I0", rho, lhs, 1.0, lhs > 1.0 + MARGIN, consts,
                           advisory=bound.source == "sampled")


def check_I0_strong(problem: ProblemSpec, rho: float) -> ConditionResult:
    _require_c8(problem, "lower")
    bound = f1_lower(problem, rho)
    bracket = I0_strong_bracket(problem)
    lhs = bound.value * bracket
    consts = {"f1_lower": bound, "bracket": Quantity(bracket, "norm form", EXTREMUM_TOL),
              "1/M(a,b)": Quantity(inv_M(problem)[1], "M_constant", EXTREMUM_TOL),
              **_structure_constants(problem, "lower")}
    return ConditionResult("I0_strong", rho, lhs, 1.0, lhs > 1.0 + MARGIN, consts,
                           advisory=bound.source == "sampled")


def check_nonexistence(problem: ProblemSpec) -> tuple[ConditionResult, ConditionResult]:
    """Both sufficient conditions for the absence of nontrivial solutions in K.

    Each is an open condition over all u, so it is sampled on a (t, u) grid
    with |u| from 1e-6 to 1e6; without an attestation the result is advisory.
    """
    decl = problem.declarations
    q = H2_lip_bound(psi_family(problem))
    m = 1.0 / inv_m(problem)[1]
    slope = m * (1.0 - q)
    t = chebyshev_lobatto(0.0, 1.0, NONEXIST_T)
    u = np.concatenate([-NONEXIST_U[::-1], NONEXIST_U])
    T, U = np.meshgrid(t, u, indexing="ij")
    with np.errstate(all="ignore"):
        ratio1 = np.asarray(problem.f2(T, U), dtype=float) * np.ones_like(T) / np.abs(U)
    lhs1 = float(np.nanmax(ratio1))
    notes1 = []
    if q >= 1.0:
        notes1.append(f"H2 Lipschitz bound {q:.6g} >= 1; clause cannot hold")
    holds1 = q < 1.0 and lhs1 < slope - MARGIN
    clause1 = ConditionResult(
        "nonexist_1", None, lhs1, slope, holds1,
        {"m": Quantity(m, "m_constant", EXTREMUM_TOL),
         "H2_bound": Quantity(q, "H2_lip_bound", EXTREMUM_TOL),
         "sup f2/|u|": Quantity(lhs1, "sampled", 0.0)},
        advisory=not decl.attest_nonexistence_1, notes=notes1)

    a, b = problem.window
    M = 1.0 / inv_M(problem)[1]
    t2 = chebyshev_lobatto(a, b, NONEXIST_T)
    T2, U2 = np.meshgrid(t2, NONEXIST_U, indexing="ij")
    with np.errstate(all="ignore"):
        ratio2 = np.asarray(problem.f1(T2, U2), dtype=float) * np.ones_like(T2) / U2
    lhs2 = float(np.nanmin(ratio2))
    clause2 = ConditionResult(
        "nonexist_2", None, lhs2, M, lhs2 > M + MARGIN,
        {"M(a,b)": Quantity(M, "M_constant", EXTREMUM_TOL),
         "inf f1/u": Quantity(lhs2, "sampled", 0.0)},
        advisory=not decl.attest_nonexistence_2)
    for clause, attested in ((clause1, decl.attest_nonexistence_1),
                             (clause2, decl.attest_nonexistence_2)):
        if attested and not clause.holds:
            clause.notes.append("attested, but the sampled check contradicts the attestation")
        if not attested:
            clause.notes.append("sampled only (advisory)")
    return clause1, clause2


def assert_consistent(nonexist: tuple[ConditionResult, ConditionResult],
                      results: list[ConditionResult]) -> None:
    """Clause 1 of non-existence forces index 1 on every V_rho, so no I0 may hold."""
    clause1 = nonexist[0]
    if not clause1.holds:
        return
    clash = [r.rho for r in results if r.kind in ("I0", "I0_strong") and r.holds]
    if clash:
        raise InternalInconsistency(
            f"non-existence clause 1 holds together with the index-0 condition at rho={clash}; "
            "a constant is wrong", rhos=clash)


def evaluate_rhos(problem: ProblemSpec, rhos) -> list[ConditionResult]:
    """I1 and I0 at every radius (both are kept; the ledger picks the holding ones)."""
    out = []
    for rho in sorted(float(r) for r in rhos):
        out.append(check_I1(problem, rho))
        out.append(check_I0(problem, rho))
    return out

