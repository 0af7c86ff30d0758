"""Kernels, envelopes and windows; derived geometric constants; built-in presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DegenerateWindow, EnvelopeViolated, NonPositiveC1
from .quadrature import (
    ExtremumRequest,
    IntegrationRequest,
    chebyshev_lobatto,
    extremize,
    golden_batch,
    integrate,
)

MIN_WINDOW = 1e-6
GRID = 257


def _one(s):
    return np.ones_like(np.asarray(s, dtype=float))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel k(t, s) on [0,1]^2 together with its (C1)-(C3) data.

    ``evaluate`` must broadcast over numpy arrays.  ``diagonal_kink`` declares a
    derivative jump along t = s; ``kinks`` lists fixed s-locations of further
    jumps.  Both become mandatory quadrature breakpoints.
    """

    evaluate: Callable
    envelope: Callable
    window: tuple[float, float]
    c1: float | None = None
    c: float | None = None
    weight: Callable = _one
    sign_class: str = "nonnegative"
    diagonal_kink: bool = True
    kinks: tuple[float, ...] = ()
    weight_singularities: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        a, b = self.window
        if not 0.0 <= a < b <= 1.0:
            raise DegenerateWindow(f"invalid window {self.window}")
        if b - a < MIN_WINDOW:
            raise DegenerateWindow(f"window {self.window} narrower than {MIN_WINDOW}")
        if self.sign_class not in ("nonnegative", "signed"):
            raise ValueError(f"unknown sign class {self.sign_class!r}")
        if self.c1 is not None and not 0.0 < self.c1 <= 1.0:
            raise ValueError("c1 must lie in (0, 1]")
        if self.c is not None:
            if not 0.0 < self.c <= 1.0:
                raise ValueError("c must lie in (0, 1]")
            if self.c1 is not None and self.c > self.c1 + 1e-15:
                raise ValueError("c must not exceed c1")

    def __call__(self, t, s):
        return self.evaluate(t, s)

    @property
    def a(self) -> float:
        return float(self.window[0])

    @property
    def b(self) -> float:
        return float(self.window[1])

    @property
    def cone_c(self) -> float:
        """The cone constant c; defaults to c1."""
        if self.c is not None:
            return self.c
        if self.c1 is None:
            raise ValueError("kernel has neither c nor c1; call compute_c1 first")
        return self.c1

    def abs_kernel(self, t, s):
        return np.abs(self.evaluate(t, s))

    def pos_kernel(self, t, s):
        return np.maximum(self.evaluate(t, s), 0.0)

    def breakpoints(self, t: float | None = None) -> tuple[float, ...]:
        pts = list(self.kinks) + list(self.weight_singularities)
        if t is not None and self.diagonal_kink:
            pts.append(float(t))
        return tuple(sorted(set(pts)))

    def with_constants(self, **kw) -> "KernelSpec":
        return replace(self, **kw)


def _section_extremum(kappa, kernel: KernelSpec, s: np.ndarray, lo: float, hi: float,
                      mode: str, tol: float = 1e-12) -> np.ndarray:
    """Window extremum over t of ``kappa(t, s)`` for every s in the batch."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    grid = chebyshev_lobatto(lo, hi, GRID)
    vals = kappa(grid[:, None], s[None, :])
    pick = np.argmin if mode == "inf" else np.argmax
    i = pick(vals, axis=0)
    best = vals[i, np.arange(s.size)]
    lo_b = grid[np.maximum(i - 1, 0)]
    hi_b = grid[np.minimum(i + 1, GRID - 1)]
    _, pol = golden_batch(lambda x: kappa(x, s), lo_b, hi_b, tol=tol, mode=mode)
    best = np.minimum(best, pol) if mode == "inf" else np.maximum(best, pol)
    if kernel.diagonal_kink:
        on = (s >= lo) & (s <= hi)
        if on.any():
            diag = np.full(s.size, np.nan)
            diag[on] = kappa(s[on], s[on])
            cand = np.where(on, diag, best)
            best = np.minimum(best, cand) if mode == "inf" else np.maximum(best, cand)
    for kt in kernel.kinks:
        if lo <= kt <= hi:
            cand = kappa(np.full(s.size, kt), s)
            best = np.minimum(best, cand) if mode == "inf" else np.maximum(best, cand)
    return best


def tilde_phi(kernel: KernelSpec, s) -> np.ndarray:
    """inf over t in [a,b] of k(t, s), batched over s."""
    return _section_extremum(kernel.evaluate, kernel, s, kernel.a, kernel.b, "inf")


def check_envelope(kernel: KernelSpec, tol: float = 1e-9, n: int = GRID) -> float:
    """Largest sampled violation ``|k(t,s)| - Phi(s)(1+tol)``; raises if positive."""
    t = chebyshev_lobatto(0.0, 1.0, n)
    s = t.copy()
    excess = np.abs(kernel.evaluate(t[:, None], s[None, :])) - kernel.envelope(s)[None, :] * (1 + tol)
    worst = float(excess.max())
    if worst > tol:
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise EnvelopeViolated(f"|k| exceeds envelope at t={t[i]:.6g}, s={s[j]:.6g}",
                               excess=worst)
    return worst


def compute_c1(kernel: KernelSpec, grid_density: int = GRID, tol: float = 1e-9) -> float:
    """inf over s of (inf over t in [a,b] of k(t,s)) / Phi(s).

    Where the envelope vanishes at an end of [0,1] the ratio is evaluated as a
    one-sided limit just inside the interval.
    """
    check_envelope(kernel, tol)
    eps = 1e-12

    def ratio(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        phi = kernel.envelope(s)
        out = np.full(s.size, np.inf)
        ok = phi > 0
        out[ok] = tilde_phi(kernel, s[ok]) / phi[ok]
        return out

    s_grid = chebyshev_lobatto(0.0, 1.0, grid_density)
    phi_ends = kernel.envelope(np.array([0.0, 1.0]))
    if phi_ends[0] <= 0:
        s_grid[0] = eps
    if phi_ends[1] <= 0:
        s_grid[-1] = 1.0 - eps
    seeds = tuple(s_grid) + (kernel.a, kernel.b) + kernel.kinks
    lo, hi = float(s_grid[0]), float(s_grid[-1])
    _, value = extremize(ExtremumRequest(ratio, (lo, hi), "inf", tol=1e-12, seeds=seeds,
                                         n_seeds=grid_density))
    if value <= tol:
        raise NonPositiveC1(f"inf of k/Phi on the window is {value:.3g}; (C2) fails")
    return float(min(value, 1.0))


def sigma(kernel: KernelSpec, t: float, **quad_kw) -> float:
    """sigma(t) = int_0^1 |k(t,s)| g(s) ds."""
    t = float(t)

    def integrand(s):
        return np.abs(kernel.evaluate(t, s)) * kernel.weight(s)

    return integrate(IntegrationRequest(integrand, (0.0, 1.0), kernel.breakpoints(t), **quad_kw))[0]


def sup_sigma(kernel: KernelSpec) -> tuple[float, float]:
    """(argmax, sup over t in [0,1] of sigma(t))."""
    return extremize(ExtremumRequest(lambda t: sigma(kernel, t), (0.0, 1.0), "sup",
                                     vectorized=False, seeds=kernel.kinks))


def m_constant(kernel: KernelSpec) -> float:
    """m with 1/m = sup_t sigma(t)."""
    return 1.0 / sup_sigma(kernel)[1]


def window_integral(kernel: KernelSpec, t: float) -> float:
    """int_a^b k(t,s) g(s) ds."""
    t = float(t)
    return integrate(IntegrationRequest(
        lambda s: kernel.evaluate(t, s) * kernel.weight(s), (kernel.a, kernel.b),
        kernel.breakpoints(t)))[0]


def inf_window_integral(kernel: KernelSpec) -> tuple[float, float]:
    if kernel.b - kernel.a < MIN_WINDOW:
        raise DegenerateWindow("window shrunk below 1e-6")
    return extremize(ExtremumRequest(lambda t: window_integral(kernel, t),
                                     (kernel.a, kernel.b), "inf", vectorized=False,
                                     seeds=kernel.kinks))


def M_constant(kernel: KernelSpec) -> float:
    """M(a,b) with 1/M(a,b) = inf over t in [a,b] of int_a^b k(t,s) g(s) ds."""
    _, val = inf_window_integral(kernel)
    if val <= 0:
        raise DegenerateWindow(f"inf of the window integral is {val:.3g} <= 0")
    return 1.0 / val


# ---------------------------------------------------------------------------
# presets


@dataclass(frozen=True, eq=False)
class BuiltinProblem:
    """A preset kernel plus closed-form reference callables for its constants."""

    preset: str
    kernel: KernelSpec
    reference: dict = field(default_factory=dict)


def dirichlet_kernel(t, s):
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    return np.where(s <= t, s * (1.0 - t), t * (1.0 - s))


def periodic_kernel(t, s):
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    e = math.e
    lower = -(np.exp(s - t + 1.0) + np.exp(t - s)) / (2.0 - 2.0 * e)
    upper = -(np.exp(s - t) + np.exp(-s + t + 1.0)) / (2.0 - 2.0 * e)
    return np.where(s <= t, lower, upper)


def dirichlet_max(a: float = 0.25, b: float = 0.75, c: float | None = None,
                  weight: Callable = _one) -> BuiltinProblem:
    """Green's function of -u'' with u(0) = u(1) = 0 (the max-type BC example)."""

    def envelope(s):
        s = np.asarray(s, dtype=float)
        return s * (1.0 - s)

    c1 = min(a, 1.0 - b)
    kernel = KernelSpec(dirichlet_kernel, envelope, (a, b), c1=c1, c=c, weight=weight,
                        name="dirichlet_max")
    s_star = a / (1.0 - (b - a))

    def ref_tilde_phi(s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= s_star, s * (1 - b), a * (1 - s))

    def ref_kphi_min(s):
        s = np.asarray(s, dtype=float)
        return np.minimum(a * (1 - s), s * (1 - b))

    def ref_kphi_max(s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= a, s * (1 - a), np.where(s <= b, s * (1 - s), b * (1 - s)))

    def ref_window_integral(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * (a * a * (t - 1) - t * ((b - 2) * b + t))

    inf_win = 0.5 * a * (a - b) * (a + b - 2) if a + b <= 1 else 0.5 * (b - 1) * (a - b) * (a + b)
    reference = {
        "tilde_phi": ref_tilde_phi,
        "c1": c1,
        "sigma": lambda t: 0.5 * np.asarray(t) * (1 - np.asarray(t)),
        "inv_m": 1.0 / 8.0,
        "K_phi_min_window": ref_kphi_min,
        "K_phi_max_window": ref_kphi_max,
        "int_K_phi_max_window": -a ** 3 / 6 + b ** 3 / 6 - b ** 2 / 2 + b / 2,
        "int01_K_phi_min_window": (a - a * b) / (2 * a - 2 * b + 2),
        "window_integral": ref_window_integral,
        "inf_window_integral": inf_win,
    }
    return BuiltinProblem("dirichlet_max", kernel, reference)


def periodic_deviation(a: float = 0.25, b: float = 0.75, c: float | None = None,
                       weight: Callable = _one) -> BuiltinProblem:
    """Green's function of -u'' + u with periodic conditions u(0)=u(1), u'(0)=u'(1)."""
    e = math.e
    peak = (e + 1.0) / (2.0 * (e - 1.0))

    def envelope(s):
        return np.full_like(np.asarray(s, dtype=float), peak)

    kernel = KernelSpec(periodic_kernel, envelope, (a, b), c1=None, c=c, weight=weight,
                        name="periodic_deviation")
    inf_win = (math.exp(a - b + 1) - math.exp(b - a) + 1 - e) / (2 - 2 * e)
    reference = {
        "sigma": lambda t: np.ones_like(np.asarray(t, dtype=float)),
        "inv_m": 1.0,
        "inf_window_integral": inf_win,
        "strengthened_threshold": (2 - 2 * e) / (math.exp(a - b + 1) - math.exp(b - a) + 1 - e),
    }
    # some s always sees a window point at circular distance 1/2, where k is smallest
    reference["c1"] = 2.0 * math.sqrt(e) / (e + 1.0)
    return BuiltinProblem("periodic_deviation", kernel, reference)


PRESETS: dict[str, Callable[..., BuiltinProblem]] = {
    "dirichlet_max": dirichlet_max,
    "periodic_deviation": periodic_deviation,
}

_CUSTOM_KERNELS: dict[str, Callable[..., KernelSpec]] = {}


def register_kernel(kernel_id: str, factory: Callable[..., KernelSpec]) -> None:
    """Make a callable kernel factory selectable by id from config files.

    The factory is called with keyword arguments ``a``, ``b`` and ``c``.
    """
    if kernel_id in PRESETS:
        raise ValueError(f"{kernel_id!r} is a built-in preset")
    _CUSTOM_KERNELS[kernel_id] = factory


def registered_kernel(kernel_id: str):
    return _CUSTOM_KERNELS.get(kernel_id)


def preset(preset_id: str, a: float = 0.25, b: float = 0.75, c: float | None = None,
           weight: Callable = _one) -> BuiltinProblem:
    try:
        factory = PRESETS[preset_id]
    except KeyError:
        raise KeyError(f"unknown preset {preset_id!r}; choose from {sorted(PRESETS)}") from None
    return factory(a, b, c, weight)


def finalize_kernel(kernel: KernelSpec) -> KernelSpec:
    """Fill in c1 (computed when absent) and leave c at its c1 default."""
    if kernel.c1 is None:
        kernel = kernel.with_constants(c1=compute_c1(kernel))
    if kernel.c is not None and kernel.c > kernel.c1 + 1e-15:
        raise ValueError(f"c = {kernel.c} exceeds c1 = {kernel.c1}")
    return kernel
