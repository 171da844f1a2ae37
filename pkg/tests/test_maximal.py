import numpy as np
import pytest
from hypothesis import given, strategies as st

from varfrac import exponent as ex
from varfrac.cz_sparse import cz_decompose
from varfrac.errors import PreconditionError
from varfrac.grid import CubeFamily, DyadicFamily, Grid, GridFunction, Interval, test_cubes
from varfrac.luxemburg import norm
from varfrac.maximal import (MaximalConfig, average_op, average_ops, dyadic_maximal, maximal, maximal_profile,
                             mean_oscillations, sharp_maximal, sharp_profile)

INF, ONE = ex.constant(np.inf), ex.constant(1)
GRID = Grid.uniform_on(-2, 2, 64)
CUBES = test_cubes(Interval(-2, 2), range(0, 6), 2)
values = st.lists(st.floats(-10, 10, allow_nan=False), min_size=64, max_size=64)


def chi(a=0.0, b=1.0, grid=GRID):
    return GridFunction.indicator(grid, Interval(a, b))


class TestAverage:
    def test_indicator_of_cube(self):
        assert average_op(chi(-0.5, 1.5), Interval(-0.5, 1.5), INF, ex.constant(2.5)) == pytest.approx(1.0)

    def test_plain_average(self):
        assert average_op(chi(), Interval(0, 2), INF, ONE) == pytest.approx(0.5)

    def test_fractional_unit_cube(self):
        assert average_op(chi(), Interval(0, 1), ex.constant(2), ONE) == pytest.approx(1.0)

    def test_fractional_scaling(self):
        # ||chi_Q||_beta |Q|^{-1} int_Q f for Q = [0, 2], beta = 2
        assert average_op(chi(), Interval(0, 2), ex.constant(2), ONE) == pytest.approx(np.sqrt(2) * 0.5)

    def test_matches_norm_quotient(self):
        f = GridFunction(GRID, np.random.default_rng(0).normal(size=64))
        Q = Interval(-1.25, 0.75)
        r, beta = ex.bump(1.2, 2.0), ex.constant(4)
        direct = norm(chi(Q.a, Q.b), beta) * norm(f * chi(Q.a, Q.b), r) / norm(chi(Q.a, Q.b), r)
        assert average_op(f, Q, beta, r) == pytest.approx(direct, rel=1e-9)


class TestMaximal:
    def test_dyadic_attains_one(self):
        g = Grid.uniform_on(0, 1, 16)
        assert dyadic_maximal(GridFunction.constant(g, 1.0), 0.5, DyadicFamily(Interval(0, 1), 4), INF, ONE) == pytest.approx(1.0)

    def test_single_cube(self):
        fam = CubeFamily.of([Interval(0, 2)])
        assert maximal(chi(), 1.5, MaximalConfig(fam, INF, ONE)) == pytest.approx(0.5)

    def test_no_containing_cube(self):
        assert maximal(chi(), -1.5, MaximalConfig(CubeFamily.of([Interval(0, 2)]), INF, ONE)) == 0.0

    def test_config_validation(self):
        with pytest.raises(PreconditionError):
            MaximalConfig(CUBES, ONE, ex.constant(2))

    @pytest.mark.parametrize("r0", [1.0, 1.5, 3.0])
    def test_power_maximal_brute_force(self, r0):
        f = GridFunction(GRID, np.random.default_rng(7).normal(size=64))
        prof = maximal_profile(f, MaximalConfig(CUBES, INF, ex.constant(r0)))
        fr = np.abs(f.values) ** r0
        avgs = np.array([f.grid.interval_integrals(fr, Q.a, Q.b) / Q.length for Q in CUBES]) ** (1 / r0)
        for x, v in zip(prof.x, prof.values):
            inside = (CUBES.a <= x) & (x <= CUBES.b)
            assert v == pytest.approx(avgs[inside].max(), rel=1e-8)

    def test_dyadic_brute_force(self):
        fam = DyadicFamily(Interval(-2, 2), 6)
        f = GridFunction(GRID, np.abs(np.random.default_rng(3).normal(size=64)))
        for x in (-1.3, 0.01, 1.99):
            best = max(f.integrate(Q) / Q.length for Q in fam.members() if Q.a <= x <= Q.b)
            assert dyadic_maximal(f, x, fam, INF, ONE) == pytest.approx(best, rel=1e-9)

    @given(values)
    def test_dominates_every_average(self, v):
        f = GridFunction(GRID, v)
        cfg = MaximalConfig(CUBES, ex.constant(3), ex.constant(1.5))
        prof = maximal_profile(f, cfg)
        avgs = average_ops(f, CUBES, cfg.beta, cfg.r)
        for i in range(0, len(CUBES), 7):
            inside = (prof.x >= CUBES.a[i]) & (prof.x <= CUBES.b[i])
            assert np.all(prof.values[inside] >= avgs[i] * (1 - 1e-9))

    @given(values, values)
    def test_sublinear(self, a, b):
        f, g = GridFunction(GRID, a), GridFunction(GRID, b)
        cfg = MaximalConfig(CUBES, INF, ex.bump(1.0, 2.0))
        lhs = maximal_profile(f + g, cfg).values
        rhs = maximal_profile(f, cfg).values + maximal_profile(g, cfg).values
        assert np.all(lhs <= rhs * (1 + 1e-8) + 1e-300)

    @given(values, values)
    def test_monotone(self, a, b):
        f = GridFunction(GRID, np.minimum(np.abs(a), np.abs(b)))
        g = GridFunction(GRID, np.maximum(np.abs(a), np.abs(b)))
        cfg = MaximalConfig(CUBES, ex.constant(4), ex.constant(2))
        assert np.all(maximal_profile(f, cfg).values <= maximal_profile(g, cfg).values * (1 + 1e-9))

    def test_exponent_monotonicity(self):
        p, q = ex.bump(1.2, 2.0, 0.0, 1.0), ex.bump(2.0, 3.0, 0.5, 1.0)
        ratios = []
        for seed in range(8):
            f = GridFunction(GRID, np.random.default_rng(seed).normal(size=64))
            mp = maximal_profile(f, MaximalConfig(CUBES, INF, p)).values
            mq = maximal_profile(f, MaximalConfig(CUBES, INF, q)).values
            ratios.append(np.max(mp / mq))
        assert max(ratios) < 1.5

    def test_monotone_in_family(self):
        f = GridFunction(GRID, np.random.default_rng(2).normal(size=64))
        small = maximal_profile(f, MaximalConfig(test_cubes(Interval(-2, 2), range(0, 4)), INF, ONE)).values
        big = maximal_profile(f, MaximalConfig(CUBES, INF, ONE)).values
        assert np.all(big >= small)

    def test_level_set_covered_by_tripled_stopping_cubes(self):
        fam = DyadicFamily(Interval(-2, 2), 6)
        f = GridFunction(GRID, np.abs(np.random.default_rng(11).normal(size=64)) ** 3)
        lam = 1.5 * f.integrate() / 4
        level = cz_decompose(f, INF, ONE, fam, lam)
        cubes = test_cubes(Interval(-2, 2), range(0, 7), 2)
        prof = maximal_profile(f, MaximalConfig(cubes, INF, ONE))
        hot = prof.x[prof.values > 2 * lam]
        assert hot.size > 0
        for x in hot:
            assert any(Q.dilate(3).a <= x <= Q.dilate(3).b for Q in level.cubes)
        dyad = maximal_profile(f, MaximalConfig(fam.as_cubes(), INF, ONE))
        union = np.zeros(GRID.n_cells, bool)
        for Q in level.cubes:
            union |= (GRID.midpoints > Q.a) & (GRID.midpoints < Q.b)
        assert np.array_equal(dyad.values > lam * (1 + 1e-9), union)


def brute_oscillation(f, Q):
    g = f.restrict(Q)
    m = (g.grid.midpoints > Q.a) & (g.grid.midpoints < Q.b)
    v, w = g.values[m], g.grid.widths[m]
    return min(np.dot(w, np.abs(v - a)) / Q.length for a in np.unique(v))


class TestSharp:
    def test_constant(self):
        assert sharp_maximal(GridFunction.constant(GRID, 3.0), 0.3, CUBES) == 0.0

    def test_indicator_half_cube(self):
        fam = CubeFamily.of([Interval(0, 2)])
        assert sharp_maximal(chi(), 1.0, fam) == pytest.approx(0.5)

    def test_sign_at_zero(self):
        g = Grid.graded(Interval(-1, 1), [0.0], base_cells=8)
        f = GridFunction.sample(g, np.sign)
        vals = [sharp_maximal(f, 0.0, CubeFamily.of([Interval(-h, h)])) for h in (0.5, 0.01, 1e-6)]
        assert vals == pytest.approx([1.0, 1.0, 1.0])

    @given(values)
    def test_median_rule_matches_scan(self, v):
        f = GridFunction(GRID, np.round(v))
        fam = test_cubes(Interval(-2, 2), range(0, 4), 2)
        osc = mean_oscillations(f, fam)
        for i in range(0, len(fam), 3):
            assert osc[i] == pytest.approx(brute_oscillation(f, fam[i]), abs=1e-12)

    def test_off_window_counts_as_zero(self):
        f = GridFunction.constant(Grid.uniform_on(0, 1, 4), 1.0)
        assert mean_oscillations(f, CubeFamily.of([Interval(-1, 1)]))[0] == pytest.approx(0.5)

    def test_profile_rows(self):
        prof = sharp_profile(chi(), CUBES, [0.5, 1.5])
        rows = list(prof.rows())
        assert len(rows) == 2 and rows[0][0] == 0.5 and rows[0][2] >= 0
