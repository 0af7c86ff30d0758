"""Nystrom discretisation, Perron roots of comparison operators and the eigenvalue criteria."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hammercert import eigen
from hammercert.errors import MissingLimits, NonFinite
from hammercert.kernels import KernelSpec, dirichlet_kernel, dirichlet_max
from hammercert.problem import Declarations, ProblemSpec


@pytest.fixture(scope="module")
def full_dirichlet():
    """The Dirichlet Green's function with the window stretched over [0, 1]."""
    return KernelSpec(dirichlet_kernel, lambda s: s * (1 - s), (0.0, 1.0), c1=1e-3)


class TestDiscretize:
    def test_full_interval_radius(self, full_dirichlet):
        op = eigen.discretize(full_dirichlet, "L1", 129, window=(0.0, 1.0))
        est = eigen.spectral_radius_op(op)
        assert abs(est.radius - 1 / math.pi ** 2) < 1e-6
        assert est.converged and est.richardson_error < 1e-6
        # the Perron iteration agrees with a dense eigensolve of the same matrix
        dense = max(abs(np.linalg.eigvals(op.matrix)))
        assert abs(eigen._perron(op.matrix)[0] - dense) < 1e-10

    def test_second_eigenvalue(self, full_dirichlet):
        op = eigen.discretize(full_dirichlet, "L1", 129, window=(0.0, 1.0))
        ev = np.sort(np.abs(np.linalg.eigvals(op.matrix)))[::-1]
        assert ev[1] == pytest.approx(1 / (4 * math.pi ** 2), abs=1e-8)

    def test_matrix_nonnegative(self, dirichlet):
        op = eigen.discretize(dirichlet.kernel, "L2", 65)
        assert op.matrix.min() >= 0.0 and op.domain == (0.0, 1.0)

    def test_apply_at_matches_integral(self, dirichlet):
        # L2 applied to u = 1 gives sigma(t) = t(1-t)/2
        op = eigen.discretize(dirichlet.kernel, "L2", 65)
        t = np.array([0.1, 0.33, 0.9])
        np.testing.assert_allclose(op.apply_at(np.ones(op.n), t), t * (1 - t) / 2, atol=1e-12)

    def test_rejects_bad_arguments(self, dirichlet):
        with pytest.raises(ValueError):
            eigen.discretize(dirichlet.kernel, "L3", 65)
        with pytest.raises(ValueError):
            eigen.discretize(dirichlet.kernel, "L1", 17)


class TestSpectralEstimate:
    @pytest.mark.parametrize("which", ["dirichlet", "periodic"])
    def test_nystrom_convergence(self, which, dirichlet, periodic):
        k = dirichlet.kernel if which == "dirichlet" else periodic[1]
        r65 = eigen.spectral_radius_op(eigen.discretize(k, "L1", 65)).radius
        r129 = eigen.spectral_radius_op(eigen.discretize(k, "L1", 129)).radius
        assert abs(r65 - r129) < 1e-6

    @pytest.mark.parametrize("which", ["dirichlet", "periodic"])
    def test_eigenpair(self, which, dirichlet, periodic):
        k = dirichlet.kernel if which == "dirichlet" else periodic[1]
        est = eigen.spectral_radius_op(eigen.discretize(k, "L1", 65))
        v = est.eigenfunction.values
        assert v.min() >= 0
        np.testing.assert_allclose(est.operator.matrix @ v, est.radius * v, atol=1e-8)
        # cone membership of the extended eigenfunction
        a, b = k.window
        t = np.linspace(0, 1, 2001)
        ext = est.extend(t)
        window = ext[(t >= a) & (t <= b)]
        assert window.min() >= k.cone_c * np.abs(ext).max() - 1e-6
        assert np.abs(ext).max() == pytest.approx(1.0, abs=1e-6)

    def test_comparison_upper_bound(self, dirichlet):
        est = eigen.spectral_radius_op(eigen.discretize(dirichlet.kernel, "Lbar", 65))
        op, v = est.operator, est.eigenfunction.values
        assert eigen.comparison_upper_bound(op, v, est.radius * (1 + 1e-6))
        assert not eigen.comparison_upper_bound(op, v, est.radius * (1 - 1e-3))
        assert not eigen.comparison_upper_bound(op, np.zeros(op.n), 1.0)

    def test_periodic_L2_radius_is_one(self, periodic):
        # int k(t, s) ds = 1, so constants are eigenfunctions with eigenvalue 1
        est = eigen.spectral_radius_op(eigen.discretize(periodic[1], "L2", 65))
        assert est.radius == pytest.approx(1.0, abs=1e-10)
        assert est.mu == pytest.approx(1.0, abs=1e-10)

    def test_zero_operator(self):
        k = KernelSpec(lambda t, s: 0 * t * s, lambda s: 1 + 0 * s, (0.25, 0.75), c1=0.5)
        est = eigen.spectral_radius_op(eigen.discretize(k, "L1", 33))
        assert est.radius == 0.0 and est.mu == math.inf


class TestLimits:
    def _problem(self, f, decl=None):
        k = dirichlet_max().kernel
        return ProblemSpec(k, lambda t, u, v: f(t, u), f, f,
                           declarations=decl or Declarations(), mesh_nodes=65)

    def test_sampled_superlinear(self):
        lim = eigen.estimate_limits(self._problem(lambda t, u: t * u ** 2), "sampled")
        assert lim.f2_at_0 == pytest.approx(0.0, abs=1e-4)
        assert lim.f1_at_0 == pytest.approx(0.0, abs=1e-4)
        assert lim.f2_at_inf == math.inf and lim.f1_at_inf == math.inf
        assert lim.source == "sampled"

    def test_sampled_linear(self):
        lim = eigen.estimate_limits(self._problem(lambda t, u: 3 * np.abs(u)), "sampled")
        assert lim.as_dict() == pytest.approx(dict(f2_at_0=3, f1_at_0=3, f2_at_inf=3, f1_at_inf=3))

    def test_divergence_can_be_fatal(self):
        with pytest.raises(NonFinite):
            eigen.estimate_limits(self._problem(lambda t, u: u ** 2), "sampled", allow_infinite=False)

    def test_analytic_requires_all(self):
        decl = Declarations(limits={"f2_at_0": 0.0})
        with pytest.raises(MissingLimits):
            eigen.estimate_limits(self._problem(lambda t, u: u, decl), "analytic")


class TestCriteria:
    def test_example2(self, example2):
        an = eigen.check_eig_criteria(example2)
        c1, c2, c3 = an.criteria
        assert an.L2_bound == pytest.approx(1.0, abs=1e-9)
        assert an.H2_bound == pytest.approx(0.5, abs=1e-9)
        assert c1.holds and c1.threshold == pytest.approx(0.5, abs=1e-9)
        assert not c2.holds and c3.holds
        assert not any(c.advisory for c in an.criteria)
        assert an.L1.converged

    def test_mu_at_most_M(self, example1, example2):
        # r(L1) >= the window-integral lower bound, so mu(L1) <= M(a,b)
        for p in (example1, example2):
            an = eigen.check_eig_criteria(p, eigen.AsymptoticLimits(0, 0, math.inf, math.inf, "analytic"))
            assert an.L1.mu <= an.strengthened_threshold + 1e-9

    def test_sampled_limits_are_advisory(self, example2):
        lim = eigen.estimate_limits(example2, "sampled")
        assert all(c.advisory for c in eigen.check_eig_criteria(example2, lim).criteria)

    def test_builtin_order_preserving(self, example1, example2):
        assert eigen.builtin_order_preserving(example1)
        assert eigen.builtin_order_preserving(example2)
