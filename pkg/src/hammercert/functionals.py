"""Boundary functionals, the psi families they pair with, and K_phi kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (
    FunctionalValidationFailed,
    MissingNormBound,
    NegativeKphi,
    PsiNotInCone,
    PsiZero,
)
from .gridfunc import GridFunction
from .kernels import KernelSpec, _section_extremum
from .quadrature import ExtremumRequest, IntegrationRequest, extremize, gauss_legendre, integrate

KINDS = ("min_window", "max_window", "point", "stieltjes", "custom")
CONE_TOL = 1e-9
ZERO_TOL = 1e-12
KPHI_TOL = 1e-10
VALIDATION_SAMPLES = 1000
VALIDATION_SEED = 20240611


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    """One boundary functional.

    ``family`` is ``"lower"`` (the alpha_1j / beta_1j, superadditive) or
    ``"upper"`` (alpha_2j / beta_2j, subadditive).  ``window`` is filled in from
    the kernel when the functional is attached to a problem.  A ``custom``
    functional is any callable mapping a vectorised function of t to a float.
    """

    kind: str
    family: str = "lower"
    window: tuple[float, float] | None = None
    tau: float | None = None
    density: Callable | None = None
    atoms: tuple[tuple[float, float], ...] = ()
    norm_bound: float | None = None
    custom: Callable | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.family not in ("lower", "upper"):
            raise ValueError(f"family must be 'lower' or 'upper', got {self.family!r}")
        if self.kind == "point" and (self.tau is None or not 0.0 <= self.tau <= 1.0):
            raise ValueError("point functional needs tau in [0, 1]")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom functional needs a callable")
        if self.norm_bound is not None and self.norm_bound < 0:
            raise ValueError("norm_bound must be nonnegative")
        for tau, _ in self.atoms:
            if not 0.0 <= tau <= 1.0:
                raise ValueError(f"atom location {tau} outside [0, 1]")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "point":
            return f"point:{self.tau:g}"
        return self.kind

    def bind(self, window: tuple[float, float]) -> "FunctionalSpec":
        return replace(self, window=(float(window[0]), float(window[1])))

    def norm(self) -> float | None:
        """The linear bound ||phi||: declared, or sharp for the built-in kinds."""
        if self.norm_bound is not None:
            return self.norm_bound
        if self.kind in ("min_window", "max_window", "point"):
            return 1.0
        if self.kind == "stieltjes":
            mass = sum(abs(m) for _, m in self.atoms)
            if self.density is not None:
                mass += integrate(IntegrationRequest(
                    lambda t: np.abs(self.density(t)), (0.0, 1.0), self._density_breaks()))[0]
            return mass
        return None

    def is_positive_measure(self) -> bool:
        if self.kind != "stieltjes":
            return self.kind in ("min_window", "max_window", "point")
        if any(m < 0 for _, m in self.atoms):
            return False
        if self.density is None:
            return True
        return bool(np.all(self.density(np.linspace(0.0, 1.0, 1025)) >= 0))

    def _density_breaks(self):
        return tuple(tau for tau, _ in self.atoms)

    def _window(self):
        if self.window is None:
            raise ValueError(f"{self.name} is not bound to a window")
        return self.window


def apply_functional(phi: FunctionalSpec, u: Callable) -> float:
    """phi[u] for a vectorised callable or GridFunction u."""
    kind = phi.kind
    if kind in ("min_window", "max_window"):
        a, b = phi._window()
        seeds = tuple(getattr(u, "nodes", ()))
        seeds = tuple(x for x in seeds if a <= x <= b)
        mode = "inf" if kind == "min_window" else "sup"
        return extremize(ExtremumRequest(u, (a, b), mode, seeds=seeds))[1]
    if kind == "point":
        return float(np.asarray(u(np.array([phi.tau])))[0])
    if kind == "stieltjes":
        total = math.fsum(m * float(np.asarray(u(np.array([tau])))[0]) for tau, m in phi.atoms)
        if phi.density is not None:
            total += integrate(IntegrationRequest(
                lambda t: u(t) * phi.density(t), (0.0, 1.0), phi._density_breaks()))[0]
        return total
    return float(phi.custom(u))


# ---------------------------------------------------------------------------
# K_phi


def _stieltjes_sections(phi: FunctionalSpec, kappa, s: np.ndarray, n_panels: int = 8,
                        order: int = 20) -> np.ndarray:
    """int kappa(t, s) w(t) dt + sum m kappa(tau, s), with t split at the diagonal."""
    out = np.zeros(s.size)
    for tau, m in phi.atoms:
        out += m * kappa(np.full(s.size, tau), s)
    if phi.density is None:
        return out
    x, w = gauss_legendre(order, 0.0, 1.0)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    for side in (0, 1):
        lo = np.zeros(s.size) if side == 0 else s
        hi = s if side == 0 else np.ones(s.size)
        span = hi - lo
        for p0, p1 in zip(edges[:-1], edges[1:]):
            t = lo[:, None] + span[:, None] * (p0 + (p1 - p0) * x[None, :])
            wt = span[:, None] * (p1 - p0) * w[None, :]
            out += np.sum(kappa(t, s[:, None]) * phi.density(t) * wt, axis=1)
    return out


def K_phi_batch(phi: FunctionalSpec, kernel: KernelSpec, s) -> np.ndarray:
    """K_phi(s) = phi[k(., s)] (lower family) or phi[|k(., s)|] (upper family)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    kappa = kernel.evaluate if phi.family == "lower" else kernel.abs_kernel
    if phi.kind in ("min_window", "max_window"):
        a, b = phi._window()
        mode = "inf" if phi.kind == "min_window" else "sup"
        vals = _section_extremum(kappa, kernel, s, a, b, mode)
    elif phi.kind == "point":
        vals = kappa(np.full(s.size, phi.tau), s)
    elif phi.kind == "stieltjes":
        vals = _stieltjes_sections(phi, kappa, s)
    else:
        vals = np.array([float(phi.custom(lambda t, si=si: kappa(t, si))) for si in s])
    vals = np.asarray(vals, dtype=float)
    worst = float(vals.min()) if vals.size else 0.0
    if worst < -KPHI_TOL:
        i = int(np.argmin(vals))
        raise NegativeKphi(f"K_phi for {phi.name} is {worst:.3g} at s={s[i]:.6g}",
                           functional=phi.name)
    return vals


def K_phi(phi: FunctionalSpec, kernel: KernelSpec, s: float) -> float:
    return float(K_phi_batch(phi, kernel, np.array([s]))[0])


def K_phi_integral(phi: FunctionalSpec, kernel: KernelSpec, lo: float = 0.0, hi: float = 1.0,
                   **quad_kw) -> float:
    """int_lo^hi K_phi(s) g(s) ds."""
    if phi.window is not None:
        extra = phi.window
    else:
        extra = ()
    breaks = tuple(kernel.kinks) + tuple(kernel.weight_singularities) + tuple(extra)
    breaks += tuple(tau for tau, _ in phi.atoms)
    if phi.kind == "point":
        breaks += (phi.tau,)
    if phi.kind == "min_window" and phi.family == "lower":
        breaks += _min_switch_points(phi, kernel)
    return integrate(IntegrationRequest(
        lambda s: K_phi_batch(phi, kernel, s) * kernel.weight(s), (lo, hi), breaks, **quad_kw))[0]


def _min_switch_points(phi: FunctionalSpec, kernel: KernelSpec) -> tuple[float, ...]:
    """Locations where the minimiser of k(., s) over the window jumps between ends."""
    a, b = phi._window()
    s = np.linspace(0.0, 1.0, 2049)
    diff = kernel.evaluate(np.full(s.size, a), s) - kernel.evaluate(np.full(s.size, b), s)
    idx = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    out = []
    for i in idx:
        lo, hi = s[i], s[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            d = kernel.evaluate(a, mid) - kernel.evaluate(b, mid)
            if np.sign(d) == np.sign(diff[i]):
                lo = mid
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return tuple(out)


# ---------------------------------------------------------------------------
# psi families


@dataclass(frozen=True, eq=False)
class Term:
    """A coefficient paired with a functional.

    ``role="gamma"`` contributes psi = int |k(t,s)| g(s) coef(s) ds;
    ``role="delta"`` contributes psi = coef itself.
    """

    role: str
    coef: Callable
    functional: FunctionalSpec
    source: str = ""

    def __post_init__(self):
        if self.role not in ("gamma", "delta"):
            raise ValueError(f"term role must be 'gamma' or 'delta', got {self.role!r}")


@dataclass(frozen=True, eq=False)
class PsiEntry:
    psi: Callable
    functional: FunctionalSpec
    role: str
    label: str
    norm: float
    window_min: float
    window_max: float


@dataclass(frozen=True, eq=False)
class PsiFamily:
    """psi_1j (lower) and psi_2j (upper), gamma terms first then delta terms."""

    lower: tuple[PsiEntry, ...] = ()
    upper: tuple[PsiEntry, ...] = ()
    dropped: tuple[str, ...] = ()

    def family(self, which: str) -> tuple[PsiEntry, ...]:
        return self.lower if which == "lower" else self.upper


def tilde_gamma(kernel: KernelSpec, coef: Callable, mesh) -> GridFunction:
    """t -> int_0^1 |k(t,s)| g(s) coef(s) ds, tabulated on the mesh nodes.

    The values come from product integration (exact treatment of the diagonal
    kink); between nodes the panel interpolant is used, which is spectrally
    accurate because integrating against the kernel smooths the coefficient.
    """
    x = mesh.nodes
    values = np.asarray(coef(x), dtype=float) * np.ones(mesh.n)
    A = mesh.product_matrix(kernel.abs_kernel, x, kernel.weight, kernel.diagonal_kink)
    return GridFunction(x, A @ values, "panel", mesh)


def _ordered(terms: Sequence[Term]) -> list[Term]:
    return [t for t in terms if t.role == "gamma"] + [t for t in terms if t.role == "delta"]


def build_psi(problem, drop_zero: bool = False) -> PsiFamily:
    """Build and validate the psi families of a problem.

    Each psi must be nonzero and lie in the cone: window minimum at least c
    times the sup norm, and every functional of the problem nonnegative on it.
    Custom functionals must first pass randomized validation; signed
    Stieltjes measures are only admitted in the lower family.
    """
    kernel: KernelSpec = problem.kernel
    a, b = kernel.window
    c = kernel.cone_c
    all_phis = [t.functional for t in (*problem.lower, *problem.upper)]
    for phi in all_phis:
        if phi.kind == "custom":
            validate_functional(phi, c)
        if phi.kind == "stieltjes" and phi.family == "upper" and not phi.is_positive_measure():
            raise FunctionalValidationFailed(
                f"{phi.name}: signed measures are only allowed in the lower family",
                functional=phi.name)
    families, dropped = {}, []
    for which, terms in (("lower", problem.lower), ("upper", problem.upper)):
        entries = []
        for j, term in enumerate(_ordered(terms)):
            if term.role == "gamma":
                psi = tilde_gamma(kernel, term.coef, problem.mesh)
            else:
                psi = _vectorised(term.coef)
            label = term.source or f"{which}[{j}]"
            _, sup_abs = extremize(ExtremumRequest(lambda t, f=psi: np.abs(f(t)), (0.0, 1.0), "sup",
                                                   seeds=(a, b, *kernel.kinks)))
            if sup_abs < ZERO_TOL:
                if drop_zero:
                    dropped.append(label)
                    continue
                raise PsiZero(f"psi for {label} vanishes (sup norm {sup_abs:.3g})", term=label)
            _, wmin = extremize(ExtremumRequest(psi, (a, b), "inf"))
            _, wmax = extremize(ExtremumRequest(psi, (a, b), "sup"))
            if wmin < c * sup_abs - CONE_TOL:
                raise PsiNotInCone(
                    f"psi for {label}: window minimum {wmin:.6g} < c*||psi|| = {c * sup_abs:.6g}",
                    term=label)
            for phi in all_phis:
                val = apply_functional(phi, psi)
                if val < -CONE_TOL:
                    raise PsiNotInCone(f"{phi.name}[psi for {label}] = {val:.3g} < 0", term=label)
            entries.append(PsiEntry(psi, term.functional, term.role, label, sup_abs, wmin, wmax))
        families[which] = tuple(entries)
    return PsiFamily(families["lower"], families["upper"], tuple(dropped))


def _vectorised(fun: Callable) -> Callable:
    def wrapped(t):
        t = np.asarray(t, dtype=float)
        return np.asarray(fun(t), dtype=float) * np.ones_like(t)
    return wrapped


def H2_lip_bound(psi: PsiFamily) -> float:
    """sum_j ||psi_2j|| * ||phi_2j||, the Lipschitz bound of H_2."""
    total = []
    for entry in psi.upper:
        norm = entry.functional.norm()
        if norm is None:
            raise MissingNormBound(f"upper functional {entry.functional.name} has no norm bound")
        total.append(entry.norm * norm)
    return math.fsum(total)


def apply_H(psi: PsiFamily, which: str, u: Callable) -> Callable:
    """H_i u(t) = sum_j psi_ij(t) phi_ij[u] (diagnostic only)."""
    entries = psi.family(which)
    coeffs = [apply_functional(e.functional, u) for e in entries]

    def Hu(t):
        t = np.asarray(t, dtype=float)
        return sum((cf * e.psi(t) for cf, e in zip(coeffs, entries)), np.zeros_like(t))

    return Hu


# ---------------------------------------------------------------------------
# randomized validation


def random_cone_function(rng: np.random.Generator, c: float, n_modes: int = 4) -> Callable:
    """A random trigonometric function with min >= c * max everywhere on [0,1]."""
    base = rng.uniform(0.1, 10.0)
    budget = base * (1.0 - c) / (1.0 + c)
    amps = rng.dirichlet(np.ones(n_modes)) * budget * rng.uniform(0.0, 1.0)
    freqs = rng.integers(1, 6, size=n_modes)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_modes)

    def u(t):
        t = np.asarray(t, dtype=float)
        return base + np.sum(amps[:, None] * np.cos(np.pi * freqs[:, None] * t.ravel()[None, :]
                                                      + phases[:, None]), axis=0).reshape(t.shape)

    return u


@dataclass
class ValidationReport:
    functional: str
    samples: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_functional(phi: FunctionalSpec, c: float, samples: int = VALIDATION_SAMPLES,
                        seed: int = VALIDATION_SEED, tol: float = 1e-9,
                        raise_on_failure: bool = True) -> ValidationReport:
    """Check the structural inequalities of the functional's family on random cone pairs.

    Lower: superadditivity and monotonicity.  Upper: subadditivity,
    non-decrease under scaling by tau >= 1, and the induced triangle bound.
    Both: nonnegativity on nonnegative functions.
    """
    rng = np.random.default_rng(seed)
    report = ValidationReport(phi.name, samples)
    for i in range(samples):
        u, v = random_cone_function(rng, c), random_cone_function(rng, c)
        t1, t2 = rng.uniform(0.0, 3.0, size=2)
        fu, fv = apply_functional(phi, u), apply_functional(phi, v)
        if min(fu, fv) < -tol:
            report.failures.append((i, "negative on a nonnegative function"))
        combo = apply_functional(phi, lambda t: t1 * u(t) + t2 * v(t))
        if phi.family == "lower":
            if combo < t1 * fu + t2 * fv - tol * (1 + abs(combo)):
                report.failures.append((i, "superadditivity"))
            bigger = apply_functional(phi, lambda t: u(t) + np.abs(v(t)))
            if bigger < fu - tol:
                report.failures.append((i, "monotonicity"))
        else:
            if combo > t1 * fu + t2 * fv + tol * (1 + abs(combo)):
                report.failures.append((i, "subadditivity"))
            scaled = apply_functional(phi, lambda t: (1.0 + t1) * u(t))
            if scaled < fu - tol:
                report.failures.append((i, "scaling"))
            gap = apply_functional(phi, lambda t: np.abs(u(t) - v(t)))
            if abs(fu - fv) > gap + tol:
                report.failures.append((i, "triangle"))
        if len(report.failures) > 10:
            break
    if raise_on_failure and report.failures:
        raise FunctionalValidationFailed(
            f"{phi.name} failed validation: {report.failures[:3]}", functional=phi.name)
    return report
