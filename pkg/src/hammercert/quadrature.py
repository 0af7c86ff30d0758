"""Deterministic adaptive integration and one-dimensional extremum search.

Integrands and objectives are expected to be numpy-vectorised: they receive a
1-D float array and must return an array of the same shape.  Pass
``vectorized=False`` to :class:`ExtremumRequest` for scalar-only objectives.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureFailure

GL_ORDER = 15
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-12
DEFAULT_MAX_SUBDIVISIONS = 2048

N_SEEDS = 257
EXTREMUM_TOL = 1e-9
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class IntegrationRequest:
    integrand: Callable[[np.ndarray], np.ndarray]
    interval: tuple[float, float]
    breakpoints: Sequence[float] = ()
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    max_subdivisions: int = DEFAULT_MAX_SUBDIVISIONS

    def __post_init__(self):
        lo, hi = self.interval
        if not hi > lo:
            raise ValueError(f"empty interval {self.interval}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


@dataclass(frozen=True)
class ExtremumRequest:
    objective: Callable
    interval: tuple[float, float]
    mode: str = "sup"
    tol: float = EXTREMUM_TOL
    seeds: Sequence[float] = field(default_factory=tuple)
    vectorized: bool = True
    n_seeds: int = N_SEEDS

    def __post_init__(self):
        lo, hi = self.interval
        if hi < lo:
            raise ValueError(f"empty interval {self.interval}")
        if self.mode not in ("sup", "inf"):
            raise ValueError(f"mode must be 'sup' or 'inf', got {self.mode!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@lru_cache(maxsize=64)
def _reference_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, lo: float = -1.0, hi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [lo, hi]."""
    x, w = _reference_rule(int(n))
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _panel(f, lo: float, hi: float) -> float:
    half = 0.5 * (hi - lo)
    x = lo + half * (_GL_X + 1.0)
    return half * float(np.dot(_GL_W, np.asarray(f(x), dtype=float)))


def _split_points(lo: float, hi: float, breakpoints: Sequence[float]) -> list[float]:
    pts = sorted({float(p) for p in breakpoints if lo < p < hi})
    return [lo, *pts, hi]


def integrate(req: IntegrationRequest) -> tuple[float, float]:
    """Globally adaptive 15-point Gauss-Legendre integration.

    Every panel carries a coarse estimate (one rule on the panel) and a fine
    estimate (the rule on both halves); their difference is the panel error.
    The panel with the largest error is bisected until the summed error meets
    ``max(abs_tol, rel_tol*|value|)``.  Declared breakpoints are panel edges
    from the start, so no panel ever straddles one.
    """
    f = req.integrand
    lo, hi = (float(v) for v in req.interval)
    edges = _split_points(lo, hi, req.breakpoints)

    heap: list = []
    # panel entry: (-err, left, right, fine, left_half, right_half)
    for a, b in zip(edges[:-1], edges[1:]):
        heapq.heappush(heap, _make_entry(f, a, b, _panel(f, a, b)))

    subdivisions = 0
    while True:
        value = math.fsum(e[3] for e in heap)
        err = math.fsum(-e[0] for e in heap)
        if err <= max(req.abs_tol, req.rel_tol * abs(value)):
            return value, err
        if subdivisions >= req.max_subdivisions:
            raise QuadratureFailure(
                f"subdivision budget {req.max_subdivisions} exhausted "
                f"(value {value:.6g}, error estimate {err:.3g})",
                value=value, error=err)
        neg_err, a, b, _fine, left, right = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            raise QuadratureFailure("panel width underflow", value=value, error=err)
        heapq.heappush(heap, _make_entry(f, a, mid, left))
        heapq.heappush(heap, _make_entry(f, mid, b, right))
        subdivisions += 1


def _make_entry(f, a: float, b: float, coarse: float):
    mid = 0.5 * (a + b)
    left, right = _panel(f, a, mid), _panel(f, mid, b)
    fine = left + right
    return (-abs(fine - coarse), a, b, fine, left, right)


def quad(f, lo: float, hi: float, breakpoints: Sequence[float] = (), **kw) -> float:
    """Shorthand returning only the value of :func:`integrate`."""
    return integrate(IntegrationRequest(f, (lo, hi), tuple(breakpoints), **kw))[0]


def chebyshev_lobatto(lo: float, hi: float, n: int = N_SEEDS) -> np.ndarray:
    k = np.arange(n)
    x = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * k / (n - 1))
    x[0], x[-1] = lo, hi
    return x


def _evaluate(objective, x: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(objective(x), dtype=float).reshape(x.shape)
    return np.array([float(objective(float(v))) for v in x])


def _golden(fun, a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimise a scalar function on [a, b] by golden-section search."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def extremize(req: ExtremumRequest) -> tuple[float, float]:
    """Locate sup or inf of a continuous objective on a closed interval.

    Samples a Chebyshev-Lobatto grid (plus any declared seeds such as kink
    locations), then polishes around the best three samples with golden-section
    search.  Returns ``(arg, value)``.
    """
    lo, hi = (float(v) for v in req.interval)
    sign = -1.0 if req.mode == "sup" else 1.0
    if hi == lo:
        v = float(_evaluate(req.objective, np.array([lo]), req.vectorized)[0])
        return lo, v

    grid = chebyshev_lobatto(lo, hi, req.n_seeds)
    extra = [float(s) for s in req.seeds if lo <= s <= hi]
    if extra:
        grid = np.union1d(grid, extra)
    vals = sign * _evaluate(req.objective, grid, req.vectorized)
    vals = np.where(np.isnan(vals), np.inf, vals)

    best_i = int(np.argmin(vals))
    best_x, best_v = float(grid[best_i]), float(vals[best_i])

    def scalar(t: float) -> float:
        v = sign * float(_evaluate(req.objective, np.array([t]), req.vectorized)[0])
        return np.inf if math.isnan(v) else v

    order = np.argsort(vals, kind="stable")[:3]
    brackets = [(float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)]))
                for i in order]
    brackets = [(a, b) for a, b in brackets if b - a > req.tol]
    if not brackets:
        return best_x, sign * best_v
    if req.vectorized:
        # the three brackets are refined together, one objective call per step
        def fun2(x):
            v = np.asarray(req.objective(x), dtype=float).reshape(x.shape)
            return np.where(np.isnan(v), sign * np.inf, v)

        lo_arr, hi_arr = (np.array(v) for v in zip(*brackets))
        xs, vs = golden_batch(fun2, lo_arr, hi_arr, req.tol, req.mode)
        found = zip(xs.tolist(), (sign * vs).tolist())
    else:
        found = (_golden(scalar, a, b, req.tol) for a, b in brackets)
    for x, v in found:
        if v < best_v:
            best_x, best_v = x, v
    return best_x, sign * best_v


def sup(f, lo: float, hi: float, **kw) -> tuple[float, float]:
    return extremize(ExtremumRequest(f, (lo, hi), "sup", **kw))


def inf(f, lo: float, hi: float, **kw) -> tuple[float, float]:
    return extremize(ExtremumRequest(f, (lo, hi), "inf", **kw))


def golden_batch(fun2, lo: np.ndarray, hi: np.ndarray, tol: float = EXTREMUM_TOL,
                 mode: str = "inf") -> tuple[np.ndarray, np.ndarray]:
    """Vectorised golden-section search over many independent brackets.

    ``fun2(x)`` receives an array aligned with ``lo``/``hi`` and returns the
    objective of each bracket's own problem at those points.
    """
    sign = -1.0 if mode == "sup" else 1.0
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = sign * fun2(c), sign * fun2(d)
    width = float(np.max(b - a)) if a.size else 0.0
    n_iter = 0 if width <= tol else int(math.ceil(math.log(tol / width) / math.log(_INVPHI)))
    for _ in range(n_iter):
        left = fc <= fd
        # left: shrink to [a, d]; else shrink to [c, b]
        new_b = np.where(left, d, b)
        new_a = np.where(left, a, c)
        new_c = np.where(left, new_b - _INVPHI * (new_b - new_a), d)
        new_d = np.where(left, c, new_a + _INVPHI * (new_b - new_a))
        probe = np.where(left, new_c, new_d)
        fp = sign * fun2(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        a, b, c, d = new_a, new_b, new_c, new_d
    x = np.where(fc <= fd, c, d)
    return x, sign * np.minimum(fc, fd)
