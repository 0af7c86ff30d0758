"""Comparison operators L1, L2, Lbar; Perron roots; asymptotic limits; eigenvalue criteria."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cone import MARGIN, resolvent_lip_bound
from .errors import MissingLimits, NoConvergence, NonFinite, NotContractive
from .functionals import H2_lip_bound
from .gridfunc import GridFunction, Mesh
from .index_conditions import ConditionResult, Quantity, inv_M, inv_m, psi_family
from .kernels import KernelSpec
from .problem import LIMIT_KEYS, ProblemSpec
from .quadrature import chebyshev_lobatto

ROLES = ("L1", "L2", "Lbar")
MIN_NODES = 33
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
RICHARDSON_TOL = 1e-6
ZERO_LEVELS = (1e-3, 1e-4, 1e-5)
INF_LEVELS = (1e3, 1e4, 1e5)
DIVERGENCE_FACTOR = 5.0


@dataclass(frozen=True, eq=False)
class NystromOperator:
    """Product-integration discretisation of a comparison operator.

    ``matrix[i, j]`` integrates kappa(t_i, s) g(s) against the Lagrange basis
    function of node j, so ``matrix @ u(nodes)`` is the operator applied to
    the panel interpolant of u.  ``weights`` are the plain quadrature weights.
    """

    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    role: str
    mesh: Mesh
    kernel: KernelSpec
    domain: tuple[float, float]

    @property
    def n(self) -> int:
        return self.nodes.size

    def kappa(self):
        return self.kernel.abs_kernel if self.role == "L2" else self.kernel.pos_kernel

    def apply_at(self, values: np.ndarray, t) -> np.ndarray:
        """(L u)(t) at arbitrary t for u given by its node values."""
        A = self.mesh.product_matrix(self.kappa(), np.atleast_1d(t), self.kernel.weight,
                                     self.kernel.diagonal_kink)
        return A @ values


def discretize(kernel: KernelSpec, role: str, n: int,
               window: tuple[float, float] | None = None) -> NystromOperator:
    """Nodes, weights and matrix of L1 / Lbar (k+ on the window) or L2 (|k| on [0,1])."""
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}")
    if n < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES} nodes, got {n}")
    if role == "L2":
        lo, hi = 0.0, 1.0
        kappa = kernel.abs_kernel
    else:
        lo, hi = window if window is not None else kernel.window
        kappa = kernel.pos_kernel
    fixed = [p for p in (*kernel.kinks, *kernel.weight_singularities) if lo < p < hi]
    mesh = Mesh.build(lo, hi, n, fixed)
    x = mesh.nodes
    A = mesh.product_matrix(kappa, x, kernel.weight, kernel.diagonal_kink)
    A = np.maximum(A, 0.0)
    return NystromOperator(x, mesh.weights, A, role, mesh, kernel, (float(lo), float(hi)))


@dataclass
class SpectralEstimate:
    radius: float
    eigenfunction: GridFunction | None
    converged: bool
    richardson_error: float
    coarse_radius: float
    operator: NystromOperator | None = field(default=None, repr=False)

    @property
    def mu(self) -> float:
        return math.inf if self.radius == 0.0 else 1.0 / self.radius

    def extend(self, t) -> np.ndarray:
        """The eigenfunction outside the window: v(t) = (L v)(t) / r."""
        if self.radius == 0.0 or self.operator is None:
            return np.zeros_like(np.atleast_1d(t), dtype=float)
        return self.operator.apply_at(self.eigenfunction.values, t) / self.radius


def _perron(A: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Power iteration with Collatz-Wielandt stopping; returns (r, vector, interval)."""
    n = A.shape[0]
    if not np.any(A):
        return 0.0, np.ones(n), (0.0, 0.0)
    x = np.ones(n)
    lo = hi = 0.0
    for _ in range(max_iter):
        y = A @ x
        pos = x > 1e-300
        ratio = y[pos] / x[pos]
        lo, hi = float(ratio.min()), float(ratio.max())
        top = y.max()
        if top == 0.0:
            return 0.0, x, (0.0, 0.0)
        if hi - lo <= tol * hi:
            return 0.5 * (lo + hi), y / top, (lo, hi)
        x = y / top
    raise NoConvergence(f"power iteration stalled; Collatz-Wielandt interval [{lo:.12g}, {hi:.12g}]",
                        interval=(lo, hi))


def spectral_radius_op(op: NystromOperator) -> SpectralEstimate:
    """Perron root at n and 2n+1 nodes; the finer value is reported."""
    fine = discretize(op.kernel, op.role, 2 * op.n + 1, op.domain if op.role != "L2" else None)
    try:
        r_n, _, iv_n = _perron(op.matrix)
        r_f, vec, iv_f = _perron(fine.matrix)
    except NoConvergence as exc:
        raise NoConvergence(f"{op.role}: {exc}", report=exc.details).tagged("eigencriteria") from None
    err = abs(r_f - r_n)
    if np.any(vec < -1e-12):
        raise NoConvergence(f"{op.role}: Perron vector not nonnegative").tagged("eigencriteria")
    vec = np.maximum(vec, 0.0)
    eig = GridFunction(fine.nodes, vec, "panel", fine.mesh) if r_f > 0 else None
    est = SpectralEstimate(r_f, eig, err < RICHARDSON_TOL, err, r_n, fine)
    if eig is not None:
        # normalise to unit sup norm over all of [0,1]
        norm = _sup_extended(est)
        est.eigenfunction = eig.with_values(vec / norm)
    return est


def _sup_extended(est: SpectralEstimate) -> float:
    lo, hi = est.operator.domain
    t = np.union1d(chebyshev_lobatto(0.0, 1.0, 257), est.operator.nodes)
    if est.operator.role == "L2":
        return float(np.abs(est.eigenfunction(t)).max())
    return float(np.abs(est.extend(t)).max())


def comparison_upper_bound(op_bar: NystromOperator, u, lam: float, tol: float = 1e-10) -> bool:
    """True when lam*u >= Lbar u at every node, certifying r(Lbar) <= lam."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    vals = np.asarray(u(op_bar.nodes) if callable(u) else u, dtype=float)
    if np.any(vals < -tol) or not np.any(vals > tol):
        return False
    return bool(np.all(lam * vals >= op_bar.matrix @ vals - tol))


# ---------------------------------------------------------------------------
# asymptotic limits


@dataclass
class AsymptoticLimits:
    f2_at_0: float
    f1_at_0: float
    f2_at_inf: float
    f1_at_inf: float
    source: str
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in LIMIT_KEYS}


def _aitken(seq: list[float]) -> float:
    a0, a1, a2 = seq
    d1, d2 = a1 - a0, a2 - a1
    denom = d2 - d1
    monotone = d1 * d2 > 0
    if not monotone or abs(denom) < 1e-300 or abs(d2) >= abs(d1):
        return a2
    return a2 - d2 * d2 / denom


def _ratio_levels(fun, t: np.ndarray, levels, signs, mode: str) -> list[float]:
    out = []
    for h in levels:
        vals = []
        for sgn in signs:
            with np.errstate(all="ignore"):
                r = np.asarray(fun(t, np.full_like(t, sgn * h)), dtype=float) / h
            vals.append(r)
        allv = np.concatenate(vals)
        out.append(float(np.nanmax(allv) if mode == "sup" else np.nanmin(allv)))
    return out


def _limit(seq: list[float], at_inf: bool, allow_infinite: bool, name: str) -> float:
    if not all(math.isfinite(v) for v in seq):
        if allow_infinite:
            return math.inf
        raise NonFinite(f"{name}: ratios are not finite ({seq})")
    growing = seq[2] > DIVERGENCE_FACTOR * max(seq[1], 1e-300) and seq[1] > DIVERGENCE_FACTOR * max(
        seq[0], 1e-300) and seq[2] > 1.0
    if growing:
        if allow_infinite:
            return math.inf
        raise NonFinite(f"{name}: sampled ratios diverge ({seq})", samples=seq)
    return max(_aitken(seq), 0.0)


def estimate_limits(problem: ProblemSpec, mode: str = "analytic",
                    allow_infinite: bool = True) -> AsymptoticLimits:
    """The four ratios f2^0, f_{1,0}, f2^inf, f_{1,inf}.

    ``analytic`` takes declared values (all four must be present).  ``sampled``
    evaluates the ratios at |u| = 1e-3, 1e-4, 1e-5 (towards 0) or 1e3, 1e4, 1e5
    (towards infinity) over t-grids and extrapolates monotone sequences with
    Aitken's delta-squared.  Detected divergence becomes +inf when
    ``allow_infinite``; otherwise :class:`NonFinite` is raised.
    """
    if mode == "analytic":
        declared = problem.declarations.limits
        missing = [k for k in LIMIT_KEYS if k not in declared]
        if missing:
            raise MissingLimits(f"declared limits missing: {missing}")
        return AsymptoticLimits(*(float(declared[k]) for k in LIMIT_KEYS), source="analytic")
    if mode != "sampled":
        raise ValueError("mode must be 'analytic' or 'sampled'")
    a, b = problem.window
    t_all = chebyshev_lobatto(0.0, 1.0, 257)
    t_win = chebyshev_lobatto(a, b, 257)
    s20 = _ratio_levels(problem.f2, t_all, ZERO_LEVELS, (1.0, -1.0), "sup")
    s10 = _ratio_levels(problem.f1, t_win, ZERO_LEVELS, (1.0,), "inf")
    s2i = _ratio_levels(problem.f2, t_all, INF_LEVELS, (1.0, -1.0), "sup")
    s1i = _ratio_levels(problem.f1, t_win, INF_LEVELS, (1.0,), "inf")
    return AsymptoticLimits(
        _limit(s20, False, allow_infinite, "f2_at_0"),
        _limit(s10, False, allow_infinite, "f1_at_0"),
        _limit(s2i, True, allow_infinite, "f2_at_inf"),
        _limit(s1i, True, allow_infinite, "f1_at_inf"),
        source="sampled",
        notes=["sampled limits are advisory"])


# ---------------------------------------------------------------------------
# the three criteria


def builtin_order_preserving(problem: ProblemSpec) -> bool:
    """(I - H2)^{-1} is order preserving and subhomogeneous on K cap P.

    Holds when every upper functional is monotone and positively homogeneous
    (max window, point evaluation, positive Stieltjes measure) and every
    psi_2j is nonnegative: the inverse is then the limit of the monotone,
    homogeneous iteration w <- u + H2 w.
    """
    psi = psi_family(problem)
    for entry in psi.upper:
        phi = entry.functional
        if phi.kind not in ("max_window", "point", "stieltjes") or not phi.is_positive_measure():
            return False
        t = chebyshev_lobatto(0.0, 1.0, 257)
        if np.any(np.asarray(entry.psi(t)) < -1e-12):
            return False
    return True


@dataclass
class EigenAnalysis:
    criteria: tuple[ConditionResult, ConditionResult, ConditionResult]
    limits: AsymptoticLimits
    L1: SpectralEstimate
    L2_bound: float
    H2_bound: float
    strengthened_threshold: float


def L1_estimate(problem: ProblemSpec, n: int = 65) -> SpectralEstimate:
    return problem.cache(("L1", n), lambda: spectral_radius_op(discretize(problem.kernel, "L1", n)))


def check_eig_criteria(problem: ProblemSpec, limits: AsymptoticLimits | None = None,
                       n: int = 65) -> EigenAnalysis:
    """Criteria (1) f2^0 < (1-||H2||*)/||L2||, (2) mu(L1) < f_{1,0}, (3) mu(L1) < f_{1,inf}.

    Criterion (1) is the strengthened Lipschitz chain; the exact principal
    characteristic value of the nonlinear composition is not computed.  Its
    order hypotheses are accepted when attested or when the upper family is of
    the built-in monotone homogeneous kind; otherwise the result is advisory.
    Criteria (2)-(3) also report the cruder threshold M(a,b) >= mu(L1).
    """
    if limits is None:
        declared = problem.declarations.limits
        mode = "analytic" if all(k in declared for k in LIMIT_KEYS) else None
        if mode is None:
            raise MissingLimits("no asymptotic limits declared; pass sampled limits explicitly")
        limits = estimate_limits(problem, "analytic")
    sampled = limits.source == "sampled"

    q = H2_lip_bound(psi_family(problem))
    if q >= 1.0:
        raise NotContractive(f"||H2||* bound {q:.6g} is not below 1")
    lip = resolvent_lip_bound(q)
    L2_bound = inv_m(problem)[1]
    threshold1 = (1.0 - q) / L2_bound
    order_ok = problem.declarations.attest_order_preserving or builtin_order_preserving(problem)
    notes1 = ["exact criterion with mu((I-H2)^{-1} L2) not implemented; strengthened chain used"]
    if not order_ok:
        notes1.append("order-preservation of (I-H2)^{-1} not attested")
    crit1 = ConditionResult(
        "eig_1", None, limits.f2_at_0, threshold1, limits.f2_at_0 < threshold1 - MARGIN,
        {"H2_bound": Quantity(q, "H2_lip_bound", 1e-9),
         "L2_bound": Quantity(L2_bound, "sup sigma", 1e-9),
         "resolvent_lip": Quantity(lip, "resolvent_lip_bound", 0.0),
         "f2_at_0": Quantity(limits.f2_at_0, limits.source)},
        advisory=sampled or not order_ok, notes=notes1)

    est = L1_estimate(problem, n)
    mu = est.mu
    M_ab = 1.0 / inv_M(problem)[1]
    shared = {"mu(L1)": Quantity(mu, "spectral_radius_op", est.richardson_error * mu * mu),
              "r(L1)": Quantity(est.radius, "spectral_radius_op", est.richardson_error),
              "M(a,b)": Quantity(M_ab, "M_constant", 1e-9)}
    crits = []
    for kind, value, key in (("eig_2", limits.f1_at_0, "f1_at_0"),
                             ("eig_3", limits.f1_at_inf, "f1_at_inf")):
        notes = []
        if not est.converged:
            notes.append(f"L1 radius not Richardson-converged (gap {est.richardson_error:.3g})")
        strong = value > M_ab + MARGIN
        notes.append(f"strengthened threshold M(a,b) {'met' if strong else 'not met'}")
        crits.append(ConditionResult(
            kind, None, value, mu, value > mu + MARGIN,
            {**shared, key: Quantity(value, limits.source)},
            advisory=sampled or not est.converged, notes=notes))
    return EigenAnalysis((crit1, crits[0], crits[1]), limits, est, L2_bound, q, M_ab)
