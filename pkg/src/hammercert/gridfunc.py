"""Discretised elements of C(I): panel meshes, grid functions, product weights."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import ExtremumRequest, extremize, gauss_legendre

POINTS_PER_PANEL = 8


def _bary_weights(x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def _lagrange_rows(x: np.ndarray, wb: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows of Lagrange basis values l_j(y_i) via the barycentric formula."""
    y = np.asarray(y, dtype=float)
    d = y[:, None] - x[None, :]
    exact = d == 0.0
    d[exact] = 1.0
    terms = wb[None, :] / d
    rows = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        rows[hit] = exact[hit].astype(float)
    return rows


@dataclass(frozen=True, eq=False)
class Mesh:
    """Composite Gauss-Legendre mesh: panel edges plus nodes per panel."""

    breaks: np.ndarray
    counts: tuple[int, ...]

    @classmethod
    def build(cls, lo: float, hi: float, n: int, fixed: Sequence[float] = ()) -> "Mesh":
        edges = sorted({float(lo), float(hi), *(float(p) for p in fixed if lo < p < hi)})
        seg_len = np.diff(edges)
        n_seg = len(seg_len)
        n_panels = max(n_seg, int(round(n / POINTS_PER_PANEL)))
        n_panels = min(n_panels, max(n // 2, n_seg))
        # panels per segment by largest remainder, at least one each
        share = seg_len / seg_len.sum() * n_panels
        per = np.maximum(np.floor(share).astype(int), 1)
        order = np.argsort(-(share - np.floor(share)), kind="stable")
        i = 0
        while per.sum() < n_panels:
            per[order[i % n_seg]] += 1
            i += 1
        breaks = [edges[0]]
        for (a, b), m in zip(zip(edges[:-1], edges[1:]), per):
            breaks.extend(np.linspace(a, b, m + 1)[1:].tolist())
        n_panels = len(breaks) - 1
        base, extra = divmod(n, n_panels)
        counts = tuple(base + (1 if p < extra else 0) for p in range(n_panels))
        return cls(np.asarray(breaks), counts)

    @property
    def n(self) -> int:
        return int(sum(self.counts))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.breaks[-1])

    @cached_property
    def _panel_data(self) -> list:
        out, start = [], 0
        for p, m in enumerate(self.counts):
            lo, hi = float(self.breaks[p]), float(self.breaks[p + 1])
            x, w = gauss_legendre(m, lo, hi)
            out.append((lo, hi, slice(start, start + m), x, _bary_weights(x), w))
            start += m
        return out

    def panels(self):
        """Yield ``(lo, hi, node_slice, nodes, bary_weights)`` per panel."""
        for lo, hi, sl, x, wb, _ in self._panel_data:
            yield lo, hi, sl, x, wb

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.concatenate([p[3] for p in self._panel_data])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.concatenate([p[5] for p in self._panel_data])

    def interp_matrix(self, points) -> np.ndarray:
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        out = np.zeros((pts.size, self.n))
        idx = np.clip(np.searchsorted(self.breaks, pts, side="right") - 1, 0, len(self.counts) - 1)
        for p, (lo, hi, sl, x, wb) in enumerate(self.panels()):
            sel = idx == p
            if sel.any():
                out[np.ix_(sel, np.arange(sl.start, sl.stop))] = _lagrange_rows(x, wb, pts[sel])
        return out

    def product_matrix(self, kappa: Callable, targets, weight: Callable | None = None,
                       diagonal_kink: bool = True, quad_points: int | None = None) -> np.ndarray:
        """Product-integration weights ``A[i, j] = int kappa(t_i, s) g(s) l_j(s) ds``.

        ``l_j`` is the Lagrange basis of the panel holding node j.  When the
        kernel has a derivative jump on the diagonal, each panel containing a
        target in its interior is split there before integrating.
        """
        t = np.atleast_1d(np.asarray(targets, dtype=float))
        g = weight if weight is not None else (lambda s: np.ones_like(s))
        A = np.zeros((t.size, self.n))
        for lo, hi, sl, x, wb in self.panels():
            q = quad_points or max(2 * len(x) + 6, 20)
            cols = np.arange(sl.start, sl.stop)
            inside = (t > lo) & (t < hi) if diagonal_kink else np.zeros(t.size, bool)
            plain = ~inside
            if plain.any():
                s, w = gauss_legendre(q, lo, hi)
                L = _lagrange_rows(x, wb, s)
                K = kappa(t[plain][:, None], s[None, :]) * (g(s) * w)[None, :]
                A[np.ix_(plain, cols)] = K @ L
            for i in np.flatnonzero(inside):
                row = np.zeros(len(x))
                for a, b in ((lo, t[i]), (t[i], hi)):
                    s, w = gauss_legendre(q, a, b)
                    row += (kappa(np.full_like(s, t[i]), s) * g(s) * w) @ _lagrange_rows(x, wb, s)
                A[i, cols] = row
        return A


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Sampled continuous function with an interpolation rule.

    ``rule="cubic"`` is a not-a-knot cubic spline through the nodes;
    ``rule="panel"`` interpolates panelwise through the Gauss-Legendre nodes
    of ``mesh`` (spectrally accurate for smooth data).
    """

    nodes: np.ndarray
    values: np.ndarray
    rule: str = "cubic"
    mesh: Mesh | None = None
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.shape != values.shape or nodes.ndim != 1:
            raise ValueError("nodes and values must be 1-D arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.rule == "panel":
            if self.mesh is None:
                raise ValueError("panel rule requires a mesh")
            object.__setattr__(self, "domain", self.mesh.domain)
        elif self.rule == "cubic":
            lo, hi = self.domain
            if nodes[0] > lo + 1e-12 or nodes[-1] < hi - 1e-12:
                raise ValueError("cubic grid functions need nodes covering the domain")
            object.__setattr__(self, "_spline", CubicSpline(nodes, values))
        else:
            raise ValueError(f"unknown interpolation rule {self.rule!r}")

    @classmethod
    def from_callable(cls, fun: Callable, mesh: Mesh) -> "GridFunction":
        x = mesh.nodes
        return cls(x, np.asarray(fun(x), dtype=float) * np.ones_like(x), "panel", mesh)

    @classmethod
    def constant(cls, value: float, mesh: Mesh) -> "GridFunction":
        return cls(mesh.nodes, np.full(mesh.n, float(value)), "panel", mesh)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.nodes, values, self.rule, self.mesh, self.domain)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.rule == "cubic":
            return self._spline(t)
        flat = np.atleast_1d(t).ravel()
        return (self.mesh.interp_matrix(flat) @ self.values).reshape(t.shape)

    def interp_matrix(self, points) -> np.ndarray:
        if self.rule == "panel":
            return self.mesh.interp_matrix(points)
        eye = CubicSpline(self.nodes, np.eye(len(self.nodes)))
        return eye(np.atleast_1d(np.asarray(points, dtype=float)))

    def _extremum(self, fun, lo, hi, mode):
        seeds = self.nodes[(self.nodes >= lo) & (self.nodes <= hi)]
        return extremize(ExtremumRequest(fun, (lo, hi), mode, seeds=tuple(seeds)))

    def sup_norm(self) -> float:
        lo, hi = self.domain
        return self._extremum(lambda t: np.abs(self(t)), lo, hi, "sup")[1]

    def window_min(self, a: float, b: float) -> tuple[float, float]:
        return self._extremum(self, a, b, "inf")

    def window_max(self, a: float, b: float) -> tuple[float, float]:
        return self._extremum(self, a, b, "sup")

    def sample(self, n: int = 201) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.domain
        x = np.linspace(lo, hi, n)
        return x, self(x)
