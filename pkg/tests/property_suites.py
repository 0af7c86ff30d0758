"""Randomised property suites, collected through the acceptance module as criterion 6."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hammercert import index_conditions as ic
from hammercert.cone import CrossMatrix, neumann_sum, resolve_positive
from hammercert.functionals import FunctionalSpec, Term, apply_functional, random_cone_function
from hammercert.kernels import dirichlet_max
from hammercert.multiplicity import ConditionLedger, match_patterns
from hammercert.problem import Declarations, ProblemSpec

N_SAMPLES = 100_000


def kernel_cases(dirichlet, periodic):
    return {"dirichlet": dirichlet.kernel, "periodic": periodic[1]}


class TestKernelInequalities:
    @pytest.mark.parametrize("which", ["dirichlet", "periodic"])
    def test_envelope_domination(self, which, dirichlet, periodic, rng):
        k = kernel_cases(dirichlet, periodic)[which]
        t, s = rng.uniform(0, 1, N_SAMPLES), rng.uniform(0, 1, N_SAMPLES)
        assert np.all(np.abs(k.evaluate(t, s)) <= k.envelope(s) + 1e-12)

    @pytest.mark.parametrize("which", ["dirichlet", "periodic"])
    def test_window_lower_bound(self, which, dirichlet, periodic, rng):
        k = kernel_cases(dirichlet, periodic)[which]
        t, s = rng.uniform(k.a, k.b, N_SAMPLES), rng.uniform(0, 1, N_SAMPLES)
        assert np.all(k.evaluate(t, s) >= k.c1 * k.envelope(s) - 1e-10)


def random_problem(rng, periodic_kernel):
    """A problem with random window, delta/gamma terms and a scaled t*u^2 nonlinearity."""
    if rng.uniform() < 0.2:
        kernel = periodic_kernel
    else:
        kernel = dirichlet_max(rng.uniform(0.05, 0.45), rng.uniform(0.55, 0.95)).kernel
    theta, g0, lam = rng.uniform(0, 0.4), rng.uniform(0, 1), rng.uniform(0.1, 20)
    lo, up = FunctionalSpec("min_window", "lower"), FunctionalSpec("max_window", "upper")
    delta = lambda t: theta + 0 * t
    gamma = lambda t: g0 + t * (1 - t)
    lower, upper = [Term("delta", delta, lo)], [Term("delta", delta, up)]
    if rng.uniform() < 0.5:
        lower.append(Term("gamma", gamma, lo))
        upper.append(Term("gamma", gamma, up))
    f = lambda t, u: lam * t * u ** 2
    decl = Declarations(f2_upper=lambda r: lam * r, f1_lower=lambda r, c: lam * kernel.a * r)
    return ProblemSpec(kernel, lambda t, u, v: f(t, u), f, f, tuple(lower), tuple(upper),
                       declarations=decl, mesh_nodes=65)


class TestDominance:
    def test_strong_implies_exact(self, periodic):
        rng = np.random.default_rng(2024)
        checked = {"I1": 0, "I0": 0}
        for _ in range(100):
            p = random_problem(rng, periodic[1])
            while not ic.c8(p).holds:
                p = random_problem(rng, periodic[1])
            rho = rng.uniform(0.1, 10)
            for exact, strong, key in ((ic.check_I1, ic.check_I1_strong, "I1"),
                                       (ic.check_I0, ic.check_I0_strong, "I0")):
                e, s = exact(p, rho), strong(p, rho)
                # the strengthened bracket is the cruder bound
                if key == "I1":
                    assert s.lhs >= e.lhs - 1e-9
                else:
                    assert s.lhs <= e.lhs + 1e-9
                if s.holds:
                    checked[key] += 1
                    assert e.holds
        assert min(checked.values()) > 0


class TestResolvents:
    def test_positivity(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            A = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.7)
            r = max(abs(np.linalg.eigvals(A)))
            if r > 0:
                A *= rng.uniform(0, 0.95) / r
            rhs = rng.uniform(0, 1, n)
            assert resolve_positive(CrossMatrix(A), 1.0, rhs).values.min() >= -1e-10

    def test_neumann_agreement(self):
        rng = np.random.default_rng(8)
        for _ in range(500):
            n = int(rng.integers(1, 7))
            A = rng.uniform(0, 1, (n, n))
            A *= rng.uniform(0, 0.9) / max(abs(np.linalg.eigvals(A)))
            rhs = rng.uniform(0, 10, n)
            direct = np.linalg.solve(np.eye(n) - A, rhs)
            assert np.abs(neumann_sum(A, rhs) - direct).max() <= 1e-8 * np.abs(rhs).max()


UPPER_KINDS = {
    "max_window": FunctionalSpec("max_window", "upper").bind((0.25, 0.75)),
    "stieltjes": FunctionalSpec("stieltjes", "upper", density=lambda t: 1 + t,
                                atoms=((0.3, 0.5), (0.9, 0.25))),
    "point": FunctionalSpec("point", "upper", tau=0.6),
}
MONOTONE_KINDS = {**UPPER_KINDS, "min_window": FunctionalSpec("min_window", "lower").bind((0.25, 0.75))}


class TestFunctionalProperties:
    @pytest.mark.parametrize("kind", sorted(UPPER_KINDS))
    def test_triangle_on_cone_pairs(self, kind):
        phi = UPPER_KINDS[kind]
        rng = np.random.default_rng(11)
        for _ in range(1000):
            u, v = random_cone_function(rng, 0.25), random_cone_function(rng, 0.25)
            gap = apply_functional(phi, lambda t: np.abs(u(t) - v(t)))
            assert abs(apply_functional(phi, u) - apply_functional(phi, v)) <= gap + 1e-9

    @pytest.mark.parametrize("kind", sorted(MONOTONE_KINDS))
    def test_monotone(self, kind):
        phi = MONOTONE_KINDS[kind]
        rng = np.random.default_rng(12)
        for _ in range(300):
            u, w = random_cone_function(rng, 0.25), random_cone_function(rng, 0.25)
            assert apply_functional(phi, lambda t: u(t) + w(t)) >= apply_functional(phi, u) - 1e-10


def chain_holds(kinds, rhos, c):
    """Ordering constraints between consecutive radii, written out independently."""
    for k, r, nxt in zip(kinds, rhos, rhos[1:]):
        limit = r / c if k == "I0" else r
        if nxt <= limit:
            return False
    return True


def best_count(entries, c):
    """Brute-force best solution count over every alternating subsequence."""
    best = 0
    for size in range(2, 5):
        for combo in combinations(entries, size):
            kinds = [k for _, k in combo]
            if any(a == b for a, b in zip(kinds, kinds[1:])):
                continue
            if chain_holds(kinds, [r for r, _ in combo], c):
                best = max(best, size - 1)
    return best


ledger_entries = st.lists(
    st.tuples(st.floats(0.1, 100.0, allow_nan=False), st.sampled_from(["I0", "I1"])),
    min_size=0, max_size=7, unique_by=lambda e: e[0])


class TestPatternSoundness:
    @settings(max_examples=300, deadline=None)
    @given(ledger_entries, st.floats(0.05, 1.0))
    def test_emitted_pattern_is_sound_and_optimal(self, entries, c):
        ledger = ConditionLedger(entries, c)
        cert = match_patterns(ledger)
        ordered = sorted((float(r), k) for r, k in entries)
        assert cert.solution_count == best_count(ordered, c)
        if cert.solution_count:
            prov = cert.provenance
            assert chain_holds(prov["kinds"], prov["radii"], c)
            assert all(r in [e[0] for e in ordered] for r in prov["radii"])

    @settings(max_examples=200, deadline=None)
    @given(ledger_entries, st.tuples(st.floats(0.1, 100.0), st.sampled_from(["I0", "I1"])),
           st.floats(0.05, 1.0))
    def test_monotone_augmentation(self, entries, extra, c):
        before = match_patterns(ConditionLedger(entries, c)).solution_count
        if any(r == extra[0] for r, _ in entries):
            return
        after = match_patterns(ConditionLedger(entries + [extra], c)).solution_count
        assert after >= before

    @settings(max_examples=200, deadline=None)
    @given(ledger_entries, st.floats(0.05, 1.0))
    def test_shells_disjoint_in_cone(self, entries, c):
        cert = match_patterns(ConditionLedger(entries, c))
        if cert.solution_count < 2:
            return
        rng = np.random.default_rng(0)
        top = max(r for r, _ in entries) / c * 2
        norms = rng.uniform(0, top, 5000)
        # cone geometry: c * ||u|| <= min_[a,b] u <= ||u||
        mins = norms * rng.uniform(c, 1.0, norms.size)
        for n, m in zip(norms, mins):
            assert sum(shell.contains(n, m) for shell in cert.shells) <= 1
