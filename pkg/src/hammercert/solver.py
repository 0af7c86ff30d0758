"""Discretised operator T u = B u + int k g f(s, u, D u) and fixed-point iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import Diverged, NoConvergence
from .functionals import FunctionalSpec
from .gridfunc import GridFunction, Mesh
from .multiplicity import ConditionLedger, Shell, match_patterns
from .problem import ProblemSpec

DIVERGENCE_NORM = 1e6
CONE_TOL = 1e-8
TRIVIAL_NORM = 1e-12
METHODS = ("picard", "anderson", "newton")
ANDERSON_DEPTH = 3
FD_STEP = 1e-7


@dataclass(eq=False)
class Discretization:
    """Product-integration form of T on a composite Gauss-Legendre mesh.

    ``W @ f_values`` integrates k g against the panel interpolant of f, and
    ``E @ u`` gives (D u) at the nodes.
    """

    problem: ProblemSpec
    n: int

    @cached_property
    def mesh(self) -> Mesh:
        if self.n == self.problem.mesh_nodes:
            return self.problem.mesh
        k = self.problem.kernel
        fixed = {*k.window, *k.kinks, *k.weight_singularities}
        return Mesh.build(0.0, 1.0, self.n, sorted(fixed))

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes

    @cached_property
    def W(self) -> np.ndarray:
        k = self.problem.kernel
        return self.mesh.product_matrix(k.evaluate, self.nodes, k.weight, k.diagonal_kink)

    @cached_property
    def E(self) -> np.ndarray:
        dev = self.problem.deviation
        if dev.kind == "none":
            return np.zeros((self.n, self.n))
        if dev.kind == "identity":
            return np.eye(self.n)
        return self.mesh.interp_matrix(dev.points(self.nodes))

    def grid(self, values) -> GridFunction:
        return GridFunction(self.nodes, np.asarray(values, dtype=float), "panel", self.mesh)

    def project(self, u) -> np.ndarray:
        """Node values of a callable, constant or GridFunction."""
        if isinstance(u, GridFunction) and u.rule == "panel" and u.mesh is self.mesh:
            return u.values.copy()
        if callable(u):
            return np.asarray(u(self.nodes), dtype=float) * np.ones(self.n)
        return np.full(self.n, float(u))

    # -- operator and derivatives

    def _f(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.asarray(self.problem.f(self.nodes, u, v), dtype=float) * np.ones(self.n)
        if not np.isfinite(out).all():
            raise Diverged("nonlinearity produced non-finite values")
        return out

    def boundary(self, u: np.ndarray) -> np.ndarray:
        bop = self.problem.boundary
        if bop.is_zero:
            return np.zeros(self.n)
        gf = self.grid(u)
        return np.asarray(bop(gf, self.nodes), dtype=float)

    def T(self, u: np.ndarray) -> np.ndarray:
        return self.boundary(u) + self.W @ self._f(u, self.E @ u)

    def _functional_gradient(self, phi: FunctionalSpec, gf: GridFunction) -> np.ndarray:
        """d phi[u] / d u_j, exact for the built-in kinds (envelope rule at the extremiser)."""
        kind = phi.kind
        mesh = self.mesh
        if kind in ("min_window", "max_window"):
            a, b = phi.window
            arg = (gf.window_min if kind == "min_window" else gf.window_max)(a, b)[0]
            return mesh.interp_matrix([arg])[0]
        if kind == "point":
            return mesh.interp_matrix([phi.tau])[0]
        if kind == "stieltjes":
            row = np.zeros(self.n)
            for tau, m in phi.atoms:
                row += m * mesh.interp_matrix([tau])[0]
            if phi.density is not None:
                row += mesh.product_matrix(lambda t, s: np.ones_like(s), [0.0],
                                           phi.density, diagonal_kink=False)[0]
            return row
        from .functionals import apply_functional
        base = apply_functional(phi, gf)
        row = np.zeros(self.n)
        for j in range(self.n):
            e = gf.values.copy()
            e[j] += FD_STEP
            row[j] = (apply_functional(phi, gf.with_values(e)) - base) / FD_STEP
        return row

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        """d(T u)/du at the nodes; f partials by central differences."""
        v = self.E @ u
        hu = FD_STEP * np.maximum(1.0, np.abs(u))
        hv = FD_STEP * np.maximum(1.0, np.abs(v))
        fu = (self._f(u + hu, v) - self._f(u - hu, v)) / (2 * hu)
        fv = (self._f(u, v + hv) - self._f(u, v - hv)) / (2 * hv)
        J = self.W * fu[None, :] + (self.W * fv[None, :]) @ self.E
        bop = self.problem.boundary
        if not bop.is_zero:
            gf = self.grid(u)
            values = bop.functional_values(gf)
            for (h, phi), x in zip(bop.parts, values):
                dx = FD_STEP * max(1.0, abs(x))
                hx = (np.asarray(h(self.nodes, np.full(self.n, x + dx)))
                      - np.asarray(h(self.nodes, np.full(self.n, x - dx)))) / (2 * dx)
                J += np.outer(hx, self._functional_gradient(phi, gf))
        return J


def discretization(problem: ProblemSpec, n: int | None = None) -> Discretization:
    n = problem.mesh_nodes if n is None else n
    return problem.cache(("discretization", n), lambda: Discretization(problem, n))


def apply_T(problem: ProblemSpec, u, n: int | None = None) -> GridFunction:
    """T u at the nodes of the problem mesh, using the interpolant of u."""
    d = discretization(problem, n)
    return d.grid(d.T(d.project(u)))


@dataclass
class SolveReport:
    solution: GridFunction
    residual: float
    iterations: int
    cone_ok: bool
    converged: bool
    shell: tuple | None = None
    method: str = "picard"
    trivial: bool = False
    window: tuple = (0.0, 1.0)
    notes: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations, "cone_ok": self.cone_ok,
                "converged": self.converged, "shell": self.shell, "method": self.method,
                "trivial": self.trivial, "notes": list(self.notes),
                "nodes": self.solution.nodes.tolist(), "values": self.solution.values.tolist()}


def cone_check(problem: ProblemSpec, u: GridFunction, tol: float = CONE_TOL) -> bool:
    a, b = problem.window
    from .functionals import apply_functional
    if u.window_min(a, b)[1] < problem.c * u.sup_norm() - tol:
        return False
    return all(apply_functional(phi, u) >= -tol for phi in problem.functionals)


def default_u0(shell: Shell | None) -> float:
    """Geometric mean of the norm bounds of a certified shell (1 when unbounded)."""
    if shell is None or shell.inner_rho is None:
        return 1.0
    lo, hi = shell.norm_bounds
    return math.sqrt(lo * hi)


def _anderson_step(G_hist, F_hist):
    """Type-II Anderson mixing on the last ``ANDERSON_DEPTH`` residuals."""
    F = np.array(F_hist).T
    G = np.array(G_hist).T
    if F.shape[1] == 1:
        return G[:, -1]
    dF = np.diff(F, axis=1)
    dG = np.diff(G, axis=1)
    gamma, *_ = np.linalg.lstsq(dF, F[:, -1], rcond=None)
    return G[:, -1] - dG @ gamma


def picard_solve(problem: ProblemSpec, u0=None, damping: float = 0.5, tol: float = 1e-10,
                 max_iter: int = 500, method: str = "picard", n: int | None = None) -> SolveReport:
    """Iterate u <- (1-damping) u + damping T u (optionally Anderson-mixed) or Newton on u - T u.

    Stops when the sup-norm residual ||u - T u|| at the nodes drops below
    ``tol``.  Raises :class:`Diverged` once ||u|| exceeds 1e6 and
    :class:`NoConvergence` when the budget runs out; both carry the report.
    A failure here never contradicts a certificate: T need not be a
    contraction near the solution.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    d = discretization(problem, n)
    u = d.project(1.0 if u0 is None else u0)
    history = []
    G_hist, F_hist = [], []
    residual = math.inf
    it = 0

    def report(vals, res, iters, converged, notes=()):
        gf = d.grid(vals)
        norm = float(np.abs(vals).max())
        # a residual tolerance of tol cannot tell norms below ~tol from zero
        trivial = norm < max(TRIVIAL_NORM, 100.0 * tol)
        ok = converged and cone_check(problem, gf)
        return SolveReport(gf, res, iters, ok, converged, None, method, trivial, problem.window,
                           list(notes) + (["trivial solution"] if trivial else []), history)

    for it in range(max_iter + 1):
        Tu = d.T(u)
        F = Tu - u
        residual = float(np.abs(F).max())
        history.append(residual)
        if residual < tol:
            return report(u, residual, it, True)
        if it == max_iter:
            break
        if method == "newton":
            J = np.eye(d.n) - d.jacobian(u)
            step = np.linalg.solve(J, F)
            lam = 1.0
            while lam > 1e-4:
                trial = u + lam * step
                if float(np.abs(d.T(trial) - trial).max()) < (1 - 1e-4 * lam) * residual:
                    break
                lam *= 0.5
            u = u + lam * step
        else:
            g = u + damping * F
            if method == "anderson":
                G_hist.append(g)
                F_hist.append(damping * F)
                G_hist, F_hist = G_hist[-(ANDERSON_DEPTH + 1):], F_hist[-(ANDERSON_DEPTH + 1):]
                g = _anderson_step(G_hist, F_hist)
            u = g
        if not np.isfinite(u).all() or np.abs(u).max() > DIVERGENCE_NORM:
            rep = report(np.nan_to_num(u, nan=np.inf), residual, it + 1, False,
                         ["iteration diverged; this does not contradict any certificate"])
            raise Diverged(f"||u|| exceeded {DIVERGENCE_NORM:g} after {it + 1} {method} steps",
                           report=rep)
    rep = report(u, residual, max_iter, False,
                 ["iteration budget exhausted; this does not contradict any certificate"])
    raise NoConvergence(f"{method} did not reach tol {tol:g}; residual {residual:.3g}",
                        report=rep).tagged("hammerstein_solver")


def shell_check(report: SolveReport, ledger: ConditionLedger) -> SolveReport:
    """Annotate which certified shell contains the solution (K_rho by norm, V_rho by window min)."""
    cert = match_patterns(ledger)
    u = report.solution
    norm = u.sup_norm()
    a, b = report.window
    wmin = u.window_min(a, b)[1]
    notes = list(report.notes)
    for shell in cert.shells:
        if shell.contains(norm, wmin):
            return replace(report, shell=(shell.inner_rho, shell.norm_bounds[1]),
                           notes=notes + [f"solution lies in the shell {shell.description}"])
    notes.append("solution lies outside every certified shell")
    return replace(report, shell=None, notes=notes)


