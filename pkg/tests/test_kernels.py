import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from varfrac import exponent as ex
from varfrac import functions as fx
from varfrac.grid import Grid, GridFunction, Interval, test_cubes
from varfrac.kernels import (K2_square_integral_exact, FamilySpec, Quadrature, annulus_norm, apply_operator,
                             beta_summability, bmo_seminorm, dilated, divergence_ladder, fractional, half_cube_points,
                             hormander_class_probe, hormander_sum, hormander_sums, indicator_norms, k2_ladder,
                             kernel_from_name, kernel_K, kernel_K1, kernel_K2, kernel_Ktilde, size_condition_probe,
                             size_quantities, zero_kernel)
from varfrac.luxemburg import indicator_norm
from varfrac.maximal import MaximalConfig, maximal_profile, sharp_profile
from varfrac.weights import Weight

INF, R2 = ex.constant(math.inf), ex.constant(2)
KT = kernel_Ktilde()
SMALL = FamilySpec(Interval(-16, 48), (0, 4), 2)


class TestScalarFactors:
    def test_K1(self):
        assert kernel_K1(2.5) == 1 and kernel_K1(1) == 0
        assert kernel_K1(2.0) == kernel_K1(3.0) == 1

    @pytest.mark.parametrize("b", [0.5, 1.0, 3.0])
    def test_K2_at_one_side(self, b):
        # just inside t = 1 the log factor is 1
        assert kernel_K2(1 - 1e-12, b) == pytest.approx(1.0)
        assert kernel_K2(1.0, b) == 0 and kernel_K2(0.0, b) == 0 and kernel_K2(-1.0, b) == 0

    def test_K2_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            kernel_K2(0.5, 0.0)

    def test_K2_matches_formula(self):
        t = np.array([1e-9, 0.01, 0.3, 0.9])
        assert kernel_K2(t, 2.0) == pytest.approx(t ** -0.5 * (1 - np.log(t)) ** -1.5)

    def test_square_integral(self):
        out = k2_ladder(2.2, levels=(24, 96, 168))
        assert 0.98 <= out["square_integrals"][-1] <= 1.0
        assert out["square_integrals"] == pytest.approx(out["exact_square_integrals"], rel=1e-3)
        assert K2_square_integral_exact(1e-300) == pytest.approx(1 - 1 / (1 + 300 * math.log(10)))

    def test_square_integral_against_quad(self):
        exact = quad(lambda t: float(kernel_K2(t, 1.0)) ** 2, 2.0 ** -24, 1, limit=200, points=[1e-6, 1e-3])[0]
        assert K2_square_integral_exact(2.0 ** -24) == pytest.approx(exact, rel=1e-7)


class TestKernels:
    @given(st.floats(-4, 8), st.floats(-4, 8))
    def test_fractional_is_exact_product(self, x, y):
        F = fractional(0.5, KT)
        assert F(x, y) == abs(x - y) ** 0.5 * KT(x, y)

    @pytest.mark.parametrize("K", [kernel_K(), kernel_K(2.0), KT, fractional(0.5, KT), fractional(0.25, kernel_K()),
                                   dilated(KT, 4.0), dilated(fractional(0.5, KT), 0.25)])
    @given(st.floats(-3, 9), st.floats(-0.999, 0.999), st.sampled_from([1, 2]))
    def test_slices_agree_with_evaluate(self, K, fixed, frac, slot):
        s = K.slice(fixed, slot)
        if s.support is None:
            pts = np.linspace(-10, 10, 41)
            vals = K(fixed, pts) if slot == 1 else K(pts, fixed)
            assert np.all(vals == 0)
            return
        lo, hi = s.support
        u = lo + (hi - lo) * (0.5 + 0.5 * frac)
        pt = s.anchor + u
        direct = K(fixed, pt) if slot == 1 else K(pt, fixed)
        assert float(s.fn(np.array([u]))[0]) == pytest.approx(float(direct), rel=1e-9, abs=1e-12)

    def test_slice_slot_validation(self):
        with pytest.raises(ValueError):
            KT.slice(1.0, 3)

    def test_dilation_is_normalised(self):
        K4 = dilated(KT, 4.0)
        assert K4(14.0, 10.0) == pytest.approx(KT(3.5, 2.5) / 4)

    def test_by_name(self):
        assert kernel_from_name("K").name == "K"
        assert kernel_from_name("ktilde").name == "Ktilde"
        assert kernel_from_name("fractional", alpha=0.25).params["alpha"] == 0.25
        with pytest.raises(ValueError):
            kernel_from_name("nope")


class TestOperator:
    def grid_fn(self, a=2.0, b=3.0):
        g = fx.problem_grid(Interval(-8, 8), (a, b), uniform=512)
        return GridFunction.indicator(g, Interval(a, b))

    def test_Ktilde_on_indicator(self):
        f = self.grid_fn()
        xs = np.array([2.9, 3.0, 3.2, 3.9, 4.0, 4.5, 4.99, 5.0, 6.0])
        Tf = apply_operator(KT, f, xs)
        for x, v in zip(xs, Tf):
            lo, hi = max(2.0, x - 2.0), min(3.0, x - 1.0)
            exact = quad(lambda y: float(kernel_K2(x - y - 1.0)), lo, hi, limit=200)[0] if lo < hi else 0.0
            assert v == pytest.approx(exact, rel=2e-3, abs=1e-12)
        assert np.all(Tf[(xs <= 3.0) | (xs >= 5.0)] == 0) and np.all(Tf[(xs > 3) & (xs < 5)] > 0)

    def test_zero_function(self):
        g = Grid.uniform_on(0, 4, 8)
        assert np.all(apply_operator(KT, GridFunction.constant(g, 0.0), [1.0, 3.5]) == 0)

    def test_fractional_sandwich(self):
        # on the support x - y lies in (1, 2), so |x - y|^alpha lies in (1, 2^alpha)
        f = self.grid_fn()
        xs = np.linspace(3.05, 4.95, 12)
        plain = apply_operator(KT, f, xs)
        frac = apply_operator(fractional(0.5, KT), f, xs)
        assert np.all(frac >= plain * (1 - 1e-12)) and np.all(frac <= 2 ** 0.5 * plain * (1 + 1e-12))

    def test_K_on_indicator_of_unit_interval(self):
        # int_0^1 K1(x - y) K2(y) dy, nonzero only for x in (2, 4)
        g = fx.problem_grid(Interval(-4, 8), (0.0, 1.0), (0.0,), uniform=512)
        f = GridFunction.indicator(g, Interval(0, 1))
        xs = np.array([1.9, 2.5, 3.0, 3.5, 4.1])
        Tf = apply_operator(kernel_K(), f, xs)
        for x, v in zip(xs, Tf):
            lo, hi = max(0.0, x - 3.0), min(1.0, x - 2.0)
            exact = quad(lambda y: float(kernel_K2(y)), lo, hi, limit=200)[0] if lo < hi else 0.0
            assert v == pytest.approx(exact, rel=2e-3, abs=1e-12)


class TestHormanderSum:
    def test_zero_kernel(self):
        assert hormander_sum(zero_kernel(), Interval(0, 4), 1.5, 2.5, INF, R2).total == 0

    def test_equal_points(self):
        assert hormander_sum(KT, Interval(2, 4), 2.7, 2.7, INF, R2).total == 0

    @given(st.floats(2.01, 13.99), st.integers(-4, 5), st.floats(0, 1), st.floats(0, 1))
    def test_far_terms_vanish(self, c, k, a, b):
        ell = 2.0 ** k
        Q = Interval(c - ell / 2, c + ell / 2)
        x, z = Q.center + ell / 4 * (2 * a - 1), Q.center + ell / 4 * (2 * b - 1)
        h = hormander_sum(KT, Q, x, z, INF, R2, 1)
        assert not h.truncated
        for m, term in h.terms:
            assert 2.0 ** (m - 1) * ell < 24 or term == 0
        assert all(t >= 0 for _, t in h.terms)

    def test_term_formula(self):
        Q, x, z = Interval(2.5, 3.5), 2.75, 3.25
        h = hormander_sum(KT, Q, x, z, INF, R2, 1)
        for m, term in h.terms:
            big = Q.dilate(2.0 ** m)
            A = annulus_norm(KT, Q, x, z, R2, 1, m)
            assert term == pytest.approx(big.length / 1.0 * A / big.length ** 0.5, rel=1e-8)

    def test_truncation_flag(self):
        h = hormander_sum(KT, Interval(3.4, 3.5), 3.43, 3.47, INF, R2, 1, M_max=2)
        assert h.truncated

    @pytest.mark.parametrize("variant", [1, 2])
    def test_constant_exponent_monotone_term_by_term(self, variant):
        # smaller exponent averages are dominated by larger ones (Jensen), so with
        # constant exponents the comparison constant is exactly 1
        fam = SMALL.build()
        triples = [(Q, float(x), float(z)) for Q in list(fam)[::7] for x in half_cube_points(Q, 3)[:1]
                   for z in half_cube_points(Q, 3)[2:]]
        lo = hormander_sums(KT, triples, INF, ex.constant(1.5), variant)
        hi = hormander_sums(KT, triples, INF, ex.constant(3.0), variant)
        for a, b in zip(lo, hi):
            tb = dict(b.terms)
            for m, t in a.terms:
                assert t <= tb[m] * (1 + 1e-9)

    def test_variable_exponent_monotone_with_measured_constant(self):
        r = ex.bump(1.5, 2.0, 3.0, 2.0)
        s = ex.bump(2.5, 3.5, 3.0, 2.0)
        fam = SMALL.build()
        triples = [(Q, float(x), float(z)) for Q in fam for x in half_cube_points(Q, 3)[:1]
                   for z in half_cube_points(Q, 3)[2:]]
        lo = hormander_sums(KT, triples, INF, r, 1)
        hi = hormander_sums(KT, triples, INF, s, 1)
        worst = max((t / dict(b.terms)[m] for a, b in zip(lo, hi) for m, t in a.terms if t > 0), default=0)
        assert 0 < worst < 2


class TestProbes:
    def test_zero_kernel_probe(self):
        rep = hormander_class_probe(zero_kernel(), INF, R2, 1, SMALL)
        assert rep.sup == 0 and rep.verdict == "bounded"
        sz = size_condition_probe(zero_kernel(), INF, R2, 1, SMALL)
        assert sz.sup == 0 and sz.verdict == "bounded"

    def test_coarse_family_not_yet_stable(self):
        assert hormander_class_probe(KT, INF, R2, 1, SMALL).verdict == "growing"

    def test_Ktilde_bounded(self):
        rep = hormander_class_probe(KT, INF, R2, 1, FamilySpec(Interval(-16, 48), (0, 6), 2))
        assert rep.verdict == "bounded" and math.isfinite(rep.sup) and rep.argsup is not None
        assert rep.tail >= 0 and rep.truncated == 0

    def test_report_json_has_terms(self):
        rep = hormander_class_probe(KT, INF, R2, 2, SMALL)
        d = json.loads(rep.to_json())
        assert d["verdict"] in ("bounded", "growing", "inconclusive")
        assert d["sums"] and all("terms" in s for s in d["sums"])

    def test_size_Ktilde_window(self):
        rep = size_condition_probe(KT, INF, R2, 1, FamilySpec(Interval(-7, 14), (0, 5), 2))
        assert rep.verdict == "bounded" and rep.sup > 0

    def test_size_fractional_scales_like_alpha(self):
        sups = []
        for k in range(4):
            lam = 2.0 ** k
            F = fractional(0.5, dilated(KT, lam))
            fam = test_cubes(Interval(-16 * lam, 48 * lam), range(0, 5), 2)
            sups.append((lam, float(size_quantities(F, INF, R2, 1, fam).max())))
        slope = np.polyfit(np.log([a for a, _ in sups]), np.log([b for _, b in sups]), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.05)

    def test_divergence_ladder_K(self):
        lad = divergence_ladder(kernel_K(), Interval(1, 3), 2.25, 1.75, ex.constant(3.0), 1, 1, levels=(24, 48, 72, 96))
        assert lad["diverging"] and all(t >= 2 for t in lad["ratios"])

    def test_no_divergence_at_two(self):
        lad = divergence_ladder(kernel_K(), Interval(1, 3), 2.25, 1.75, R2, 1, 1, levels=(24, 48, 72, 96))
        assert not lad["diverging"] and max(lad["ratios"]) < 1.1

    def test_indicator_norms_match(self):
        p = ex.bump(1.5, 3.0, 1.0, 1.0)
        a, b = np.array([-1.0, 0.5, 2.0]), np.array([0.0, 1.5, 6.0])
        got = indicator_norms(p, a, b, cells=256)
        want = [indicator_norm(p, Interval(x, y)) for x, y in zip(a, b)]
        assert got == pytest.approx(want, rel=1e-3)


class TestSummability:
    @pytest.mark.parametrize("beta", [ex.constant(2), ex.bump(1.5, 4.0, 0.0, 1.0)])
    @pytest.mark.parametrize("Q", [Interval(-1, 1), Interval(0, 8), Interval(3, 3.25)])
    def test_stable_in_M(self, beta, Q):
        vals = [beta_summability(beta, Q, M) for M in (10, 20, 40)]
        assert vals[0] <= vals[1] <= vals[2]
        assert vals[2] - vals[1] < 0.25 * (vals[1] - vals[0])
        bplus = 1 / beta.recip(np.linspace(-8, 8, 1601)).min()
        assert vals[2] <= 1 / (1 - 2 ** (-1 / bplus))

    def test_constant_closed_form(self):
        # sum of 2^(-m/2)
        assert beta_summability(ex.constant(2), Interval(-1, 1), 60) == pytest.approx(1 / (1 - 2 ** -0.5), rel=1e-9)


class TestBMO:
    GRID = Grid.uniform_on(-2, 2, 64)
    CUBES = test_cubes(Interval(-2, 2), range(0, 6), 2)

    def test_constant(self):
        one = Weight.constant(self.GRID)
        assert bmo_seminorm(GridFunction.constant(self.GRID, 2.0), one, self.CUBES) == 0

    def test_unit_weight_is_sharp_sup(self):
        f = GridFunction.indicator(self.GRID, Interval(0, 1))
        want = sharp_profile(f, self.CUBES).values.max()
        assert bmo_seminorm(f, Weight.constant(self.GRID), self.CUBES) == want

    def test_power_weight_stable(self):
        g = Grid.graded(Interval(-2, 2), [0.0], base_cells=64, floor=2.0 ** -30)
        f = GridFunction.sample(g, lambda x: np.floor(np.log2(np.abs(x) + 2 ** -20)) / 20)
        w = Weight.power_law(0.2, Interval(-2, 2), base_cells=64, floor=2.0 ** -30)
        vals = [bmo_seminorm(f, w, test_cubes(Interval(-2, 2), range(0, d), 2)) for d in (8, 10, 12)]
        assert all(math.isfinite(v) for v in vals)
        assert vals[0] <= vals[1] <= vals[2] <= vals[0] * 1.1


class TestSharpPointwise:
    """``(M#|Tf|^d)^(1/d) <= C M f`` at grid midpoints, one C across the function suite."""

    WIN = Interval(-64, 64)

    def _ratios(self, K, delta, beta, r):
        out = []
        for spec in fx.DEFAULT_SUITE[:4]:
            tf = fx.from_spec(spec)
            g = fx.problem_grid(self.WIN, tf.breakpoints, (0.0,), uniform=1024, refine=[(0, 8, 512)])
            f = tf.on(g)
            Tf = GridFunction(g, np.abs(apply_operator(K, f, g.midpoints)) ** delta)
            fam = test_cubes(self.WIN, range(0, 12), 2)
            lhs = sharp_profile(Tf, fam, g.midpoints).values ** (1 / delta)
            near = test_cubes(self.WIN, range(0, 12), 2, near=f.support_hull)
            rhs = maximal_profile(f, MaximalConfig(near, beta, r), fast_constant=True).values
            assert np.all(lhs[rhs == 0] == 0)
            m = rhs > 0
            out.append(float(np.max(lhs[m] / rhs[m])))
        return out

    def test_singular_half_power(self):
        ratios = self._ratios(KT, 0.5, INF, ex.conjugate(R2))
        assert max(ratios) < 1.0

    def test_fractional(self):
        ratios = self._ratios(fractional(0.5, KT), 1.0, ex.constant(2), ex.conjugate(R2))
        assert max(ratios) < 2.0
