"""Boundary functionals, K_phi sections and the psi families."""

from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp

from hammercert.errors import FunctionalValidationFailed, PsiNotInCone, PsiZero
from hammercert.functionals import (
    FunctionalSpec, K_phi_batch, K_phi_integral, Term, apply_functional, build_psi,
    H2_lip_bound, random_cone_function, validate_functional)
from hammercert.kernels import dirichlet_max
from hammercert.problem import ProblemSpec

W = (0.25, 0.75)
MIN_LO = FunctionalSpec("min_window", "lower").bind(W)
MAX_UP = FunctionalSpec("max_window", "upper").bind(W)
T_SYM, S_SYM = sp.symbols("t s")


def circ(x, y):
    d = np.abs(x - y) % 1.0
    return np.minimum(d, 1.0 - d)


def periodic_profile(delta):
    """k as a function of the circular distance delta in [0, 1/2]."""
    e = math.e
    return (np.exp(1 - delta) + np.exp(delta)) / (2 * (e - 1))


def linear_problem(kernel, lower=(), upper=()):
    zero = lambda t, *args: 0.0 * t
    return ProblemSpec(kernel, zero, zero, zero, tuple(lower), tuple(upper), mesh_nodes=65)


class TestApply:
    def test_window_extrema(self):
        u = lambda t: np.sin(np.pi * t)
        assert apply_functional(MIN_LO, u) == pytest.approx(np.sin(np.pi / 4), abs=1e-12)
        assert apply_functional(MAX_UP, u) == pytest.approx(1.0, abs=1e-12)

    def test_point(self):
        phi = FunctionalSpec("point", tau=0.3)
        assert apply_functional(phi, lambda t: t ** 2) == pytest.approx(0.09)

    def test_stieltjes_density_and_atoms(self):
        phi = FunctionalSpec("stieltjes", density=lambda t: 2 * t, atoms=((0.5, 3.0),))
        # int_0^1 t^2 * 2t dt + 3 * (1/4)
        assert apply_functional(phi, lambda t: t ** 2) == pytest.approx(0.5 + 0.75, abs=1e-12)

    def test_norms(self):
        assert MIN_LO.norm() == 1.0 and MAX_UP.norm() == 1.0
        phi = FunctionalSpec("stieltjes", density=lambda t: np.cos(np.pi * t), atoms=((0.2, -0.5),))
        # total variation: int |cos(pi t)| = 2/pi, plus the atom mass
        assert phi.norm() == pytest.approx(2 / np.pi + 0.5, abs=1e-10)
        assert not phi.is_positive_measure()

    def test_unbound_window_rejected(self):
        with pytest.raises(ValueError):
            apply_functional(FunctionalSpec("min_window"), np.sin)

    @pytest.mark.parametrize("kw", [dict(kind="nope"), dict(kind="point"),
                                    dict(kind="point", tau=1.5), dict(kind="min_window", family="x"),
                                    dict(kind="custom")])
    def test_invalid_specs(self, kw):
        with pytest.raises(ValueError):
            FunctionalSpec(**kw)


class TestKphi:
    s = np.linspace(0.0, 1.0, 101)

    def test_dirichlet_closed_forms(self):
        k = dirichlet_max().kernel
        a, b = W
        lo = np.minimum(a * (1 - self.s), self.s * (1 - b))
        hi = np.where(self.s <= a, self.s * (1 - a),
                      np.where(self.s <= b, self.s * (1 - self.s), b * (1 - self.s)))
        np.testing.assert_allclose(K_phi_batch(MIN_LO, k, self.s), lo, atol=1e-9)
        np.testing.assert_allclose(K_phi_batch(MAX_UP, k, self.s), hi, atol=1e-9)

    def test_periodic_closed_forms(self, periodic):
        _, k = periodic
        s = self.s
        inside = (s >= W[0]) & (s <= W[1])
        nearest = np.where(inside, 0.0, np.minimum(circ(s, W[0]), circ(s, W[1])))
        antipode_inside = ((s + 0.5) % 1.0 >= W[0]) & ((s + 0.5) % 1.0 <= W[1])
        farthest = np.where(antipode_inside, 0.5, np.maximum(circ(s, W[0]), circ(s, W[1])))
        np.testing.assert_allclose(K_phi_batch(MAX_UP, k, s), periodic_profile(nearest), atol=1e-9)
        np.testing.assert_allclose(K_phi_batch(MIN_LO, k, s), periodic_profile(farthest), atol=1e-9)

    def test_integrals(self):
        # exact: int_0^1 min(...) = 1/16, int_a^b min(...) = 3/64, int_0^1 max(...) = 31/192
        sv = sp.symbols("s")
        q = sp.Rational(1, 4)
        lower_01 = sp.integrate(sv * q, (sv, 0, sp.Rational(1, 2))) * 2
        lower_ab = sp.integrate(sv * q, (sv, q, sp.Rational(1, 2))) * 2
        upper_01 = (sp.integrate(sv * (1 - q), (sv, 0, q)) * 2
                    + sp.integrate(sv * (1 - sv), (sv, q, 3 * q)))
        k = dirichlet_max().kernel
        assert K_phi_integral(MIN_LO, k) == pytest.approx(float(lower_01), abs=1e-12)
        assert K_phi_integral(MIN_LO, k, *W) == pytest.approx(float(lower_ab), abs=1e-12)
        assert K_phi_integral(MAX_UP, k) == pytest.approx(float(upper_01), abs=1e-12)
        assert (lower_01, lower_ab, upper_01) == (sp.Rational(1, 16), sp.Rational(3, 64),
                                                 sp.Rational(31, 192))


class TestValidation:
    def test_builtin_kinds_pass(self):
        for phi in (MIN_LO, MAX_UP, FunctionalSpec("point", "upper", tau=0.4)):
            assert validate_functional(phi, 0.25, samples=200).passed

    def test_bad_custom_functional_fails(self):
        # a negated max is neither nonnegative nor subadditive on the cone
        bad = FunctionalSpec("custom", "upper",
                             custom=lambda u: -float(np.max(u(np.linspace(0, 1, 65)))))
        with pytest.raises(FunctionalValidationFailed):
            validate_functional(bad, 0.25, samples=50)

    def test_build_psi_rejects_bad_custom(self):
        bad = FunctionalSpec("custom", "lower", custom=lambda u: float(u(np.array([0.5]))[0] ** 2))
        problem = linear_problem(dirichlet_max().kernel,
                                 lower=[Term("delta", lambda t: 0.5 + 0 * t, bad)])
        with pytest.raises(FunctionalValidationFailed):
            build_psi(problem)

    def test_signed_upper_measure_rejected(self):
        signed = FunctionalSpec("stieltjes", "upper", atoms=((0.5, 1.0), (0.3, -0.1)))
        problem = linear_problem(dirichlet_max().kernel,
                                 upper=[Term("delta", lambda t: 0.5 + 0 * t, signed)])
        with pytest.raises(FunctionalValidationFailed):
            build_psi(problem)

    def test_random_cone_functions_in_cone(self, rng):
        t = np.linspace(0, 1, 2001)
        for _ in range(200):
            u = random_cone_function(rng, 0.25)(t)
            assert u.min() >= 0.25 * u.max() - 1e-12


class TestPsi:
    def test_example1_psi_constants(self, example1):
        # m1 = min_window of the gamma term psi and m2 = its max_window: derived with sympy
        g = T_SYM * (1 - T_SYM) + sp.Rational(1, 4)
        tilde = (sp.integrate((S_SYM * (1 - T_SYM) * g.subs(T_SYM, S_SYM)), (S_SYM, 0, T_SYM))
                 + sp.integrate(T_SYM * (1 - S_SYM) * g.subs(T_SYM, S_SYM), (S_SYM, T_SYM, 1)))
        m1 = tilde.subs(T_SYM, sp.Rational(1, 4))
        m2 = tilde.subs(T_SYM, sp.Rational(1, 2))
        assert (m1, m2) == (sp.Rational(43, 1024), sp.Rational(11, 192))
        psi = build_psi(example1)
        assert psi.lower[0].window_min == pytest.approx(float(m1), abs=1e-9)
        assert psi.upper[0].window_max == pytest.approx(float(m2), abs=1e-9)
        assert [e.role for e in psi.lower] == ["gamma", "delta"]

    def test_H2_bound_example2(self, example2):
        assert H2_lip_bound(build_psi(example2)) == pytest.approx(0.5, abs=1e-9)

    def test_psi_zero(self):
        problem = linear_problem(dirichlet_max().kernel, lower=[Term("delta", lambda t: 0 * t, MIN_LO)])
        with pytest.raises(PsiZero):
            build_psi(problem)
        assert build_psi(problem, drop_zero=True).dropped == ("lower[0]",)

    def test_psi_not_in_cone(self):
        problem = linear_problem(dirichlet_max().kernel, lower=[Term("delta", lambda t: t ** 3, MIN_LO)])
        with pytest.raises(PsiNotInCone):
            build_psi(problem)

    def test_term_role_checked(self):
        with pytest.raises(ValueError):
            Term("beta", np.sin, MIN_LO)

