"""The full problem decomposition: kernel, nonlinearities, functionals, B and D."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainViolation
from .functionals import FunctionalSpec, Term, apply_functional
from .gridfunc import Mesh
from .kernels import KernelSpec

LIMIT_KEYS = ("f2_at_0", "f1_at_0", "f2_at_inf", "f1_at_inf")


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """B u(t) = sum_i h_i(t, phi_i[u]) for scalar maps h_i and functionals phi_i."""

    parts: tuple[tuple[Callable, FunctionalSpec], ...] = ()

    @property
    def is_zero(self) -> bool:
        return not self.parts

    def functional_values(self, u: Callable) -> list[float]:
        return [apply_functional(phi, u) for _, phi in self.parts]

    def __call__(self, u: Callable, t, values: list[float] | None = None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if values is None:
            values = self.functional_values(u)
        for (h, _), x in zip(self.parts, values):
            out = out + h(t, np.full_like(t, x))
        return out


@dataclass(frozen=True, eq=False)
class DeviationOperator:
    """D u = u o eta (``compose``), D u = u (``identity``), or absent (``none``)."""

    kind: str = "none"
    eta: Callable | None = None
    window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "identity", "compose"):
            raise ValueError(f"unknown deviation kind {self.kind!r}")
        if self.kind == "compose" and self.eta is None:
            raise ValueError("compose deviation needs eta")

    def points(self, t) -> np.ndarray:
        """eta(t), validated to stay in [0,1] (and in the window when declared)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "identity":
            return t.copy()
        if self.kind == "none":
            raise ValueError("no deviation points without a deviation")
        x = np.asarray(self.eta(t), dtype=float) * np.ones_like(t)
        if np.any(x < -1e-14) or np.any(x > 1 + 1e-14) or not np.isfinite(x).all():
            raise DomainViolation("eta leaves [0, 1]")
        if self.window is not None:
            a, b = self.window
            if np.any(x < a - 1e-12) or np.any(x > b + 1e-12):
                raise DomainViolation(f"eta leaves the window [{a}, {b}]")
        return np.clip(x, 0.0, 1.0)

    def __call__(self, u: Callable, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            return np.zeros_like(t)
        return np.asarray(u(self.points(t)), dtype=float)


@dataclass(frozen=True, eq=False)
class Declarations:
    """User-supplied closed forms and attestations.

    ``f2_upper(rho)`` and ``f1_lower(rho, c)`` replace the sampled bounds;
    ``limits`` holds any of the four asymptotic ratios.  Attestation flags
    record analytic facts the tool cannot verify by sampling.
    """

    f2_upper: Callable | None = None
    f1_lower: Callable | None = None
    limits: dict = field(default_factory=dict)
    attest_nonexistence_1: bool = False
    attest_nonexistence_2: bool = False
    attest_order_preserving: bool = False

    def __post_init__(self):
        unknown = set(self.limits) - set(LIMIT_KEYS)
        if unknown:
            raise ValueError(f"unknown limit keys {sorted(unknown)}")
        for key, val in self.limits.items():
            if not val >= 0:
                raise ValueError(f"limit {key} must be >= 0 (inf allowed), got {val}")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """u = B u + int_0^1 k(t,s) g(s) f(s, u(s), D u(s)) ds with its cone decomposition.

    ``lower`` and ``upper`` are the gamma/delta terms paired with their
    functionals; ``f1`` and ``f2`` the lower and upper comparison
    nonlinearities.  Functionals are bound to the kernel window on creation.
    """

    kernel: KernelSpec
    f: Callable
    f1: Callable
    f2: Callable
    lower: tuple[Term, ...] = ()
    upper: tuple[Term, ...] = ()
    boundary: BoundaryOperator = field(default_factory=BoundaryOperator)
    deviation: DeviationOperator = field(default_factory=DeviationOperator)
    declarations: Declarations = field(default_factory=Declarations)
    mesh_nodes: int = 129
    name: str = "problem"

    def __post_init__(self):
        if self.kernel.c1 is None:
            raise ValueError("kernel constants not finalized (c1 missing)")
        w = self.kernel.window

        def bind_terms(terms, family):
            out = []
            for term in terms:
                phi = term.functional
                if phi.family != family:
                    raise ValueError(f"{phi.name} belongs to the {phi.family} family, "
                                     f"not {family}")
                out.append(Term(term.role, term.coef, phi.bind(w), term.source))
            return tuple(out)

        object.__setattr__(self, "lower", bind_terms(self.lower, "lower"))
        object.__setattr__(self, "upper", bind_terms(self.upper, "upper"))
        parts = tuple((h, phi.bind(w)) for h, phi in self.boundary.parts)
        object.__setattr__(self, "boundary", BoundaryOperator(parts))
        if self.deviation.kind == "compose" and self.deviation.window is None:
            object.__setattr__(self, "deviation",
                               DeviationOperator("compose", self.deviation.eta, w))
        object.__setattr__(self, "_cache", {})

    @property
    def c(self) -> float:
        return self.kernel.cone_c

    @property
    def c1(self) -> float:
        return self.kernel.c1

    @property
    def window(self) -> tuple[float, float]:
        return self.kernel.window

    @property
    def functionals(self) -> list[FunctionalSpec]:
        return [t.functional for t in (*self.lower, *self.upper)]

    @cached_property
    def mesh(self) -> Mesh:
        a, b = self.kernel.window
        fixed = {a, b, *self.kernel.kinks, *self.kernel.weight_singularities}
        return Mesh.build(0.0, 1.0, self.mesh_nodes, sorted(fixed))

    def cache(self, key, builder):
        """Memoise f-independent structure (psi, cross matrices, kernel constants)."""
        store = self._cache
        if key not in store:
            store[key] = builder()
        return store[key]

    def scaled(self, lam: float) -> "ProblemSpec":
        """The same problem with f, f1 and f2 multiplied by lam (closed forms too).

        The gamma/delta terms are left alone, so this is meant for probing the
        homogeneity of the index conditions rather than as a new model.
        """
        decl = self.declarations
        f2u = None if decl.f2_upper is None else (lambda rho, g=decl.f2_upper: lam * g(rho))
        f1l = None if decl.f1_lower is None else (lambda rho, c, g=decl.f1_lower: lam * g(rho, c))
        limits = {k: (v * lam if math.isfinite(v) else v) for k, v in decl.limits.items()}
        new_decl = Declarations(f2u, f1l, limits, decl.attest_nonexistence_1,
                                decl.attest_nonexistence_2, decl.attest_order_preserving)
        out = ProblemSpec(
            self.kernel,
            lambda t, u, v, f=self.f: lam * f(t, u, v),
            lambda t, u, f=self.f1: lam * f(t, u),
            lambda t, u, f=self.f2: lam * f(t, u),
            self.lower, self.upper, self.boundary, self.deviation, new_decl,
            self.mesh_nodes, f"{self.name}*{lam:g}")
        # the cache only holds f-independent structure, so it can be shared
        object.__setattr__(out, "_cache", self._cache)
        return out
