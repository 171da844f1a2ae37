import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from varfrac import exponent as ex
from varfrac.cz_sparse import build_sparse, cube_mask, cz_decompose, family_averages, sparse_operator
from varfrac.errors import RootAboveThreshold
from varfrac.grid import DyadicFamily, GridFunction, Interval
from varfrac.maximal import MaximalConfig, maximal_profile

INF, ONE = ex.constant(np.inf), ex.constant(1)


def setup(root=Interval(0, 4), depth=6, fn=None):
    fam = DyadicFamily(root, depth)
    g = fam.aligned_grid()
    f = GridFunction.indicator(g, Interval(0, 1)) if fn is None else GridFunction.sample(g, fn)
    return fam, f


def brute_stopping(f, fam, lam):
    """Maximal members with plain average above lam, by scanning every cube."""
    above = {(Q.a, Q.b) for Q in fam.members() if f.integrate(Q) / Q.length > lam * (1 + 1e-9)}
    out = set()
    for Q in fam.members():
        if (Q.a, Q.b) in above and not any((P.a, P.b) in above for P in fam.ancestors(Q)):
            out.add((Q.a, Q.b))
    return out


class TestDecompose:
    def test_tie_at_half(self):
        fam, f = setup()
        lev = cz_decompose(f, INF, ONE, fam, 0.5)
        assert lev.cubes == [Interval(0, 1)]
        assert {(Q.a, Q.b) for Q in lev.cubes} == brute_stopping(f, fam, 0.5)

    def test_above_sup_selects_nothing(self):
        fam, f = setup()
        assert cz_decompose(f, INF, ONE, fam, 1.0).cubes == []

    def test_smallest_admissible_lambda_takes_root_children(self):
        # lambda cannot go below the root average, so the limiting case is a tie there
        fam, f = setup()
        assert cz_decompose(f, INF, ONE, fam, 0.25).cubes == [Interval(0, 2)]
        with pytest.raises(RootAboveThreshold):
            cz_decompose(f, INF, ONE, fam, 1e-6)

    def test_root_above_threshold(self):
        fam, f = setup()
        with pytest.raises(RootAboveThreshold):
            cz_decompose(f, INF, ONE, fam, 0.1)

    @given(st.integers(0, 2 ** 20), st.floats(1.05, 6.0))
    def test_matches_brute_force(self, seed, mult):
        fam = DyadicFamily(Interval(-2, 2), 5)
        g = fam.aligned_grid()
        v = np.exp(2 * np.random.default_rng(seed).normal(size=g.n_cells))
        f = GridFunction(g, v)
        lam = mult * f.integrate() / 4
        lev = cz_decompose(f, INF, ONE, fam, lam)
        assert {(Q.a, Q.b) for Q in lev.cubes} == brute_stopping(f, fam, lam)
        assert lev.within_bounds()
        masks = [cube_mask(g.midpoints, Q) for Q in lev.cubes]
        assert np.all(np.sum(masks, axis=0) <= 1) if masks else True

    def test_variable_exponent_bounds(self):
        fam, f = setup(fn=lambda x: np.exp(-8 * (x - 1.3) ** 2))
        beta, r = ex.constant(6), ex.bump(1.0, 1.8, 1.0, 1.0)
        root = family_averages(f, beta, r, fam).root
        lev = cz_decompose(f, beta, r, fam, 2 * root)
        assert lev.cubes and lev.within_bounds()


class TestSparse:
    def test_indicator_a4(self):
        fam, f = setup()
        S = build_sparse(f, INF, ONE, fam, 4.0)
        assert S.eta >= 0.5 and S.disjoint and S.nested

    def test_zero_function(self):
        fam, f = setup(fn=lambda x: 0 * x)
        S = build_sparse(f, INF, ONE, fam, 4.0)
        assert S.cubes == [] and S.eta is None

    def test_bad_base(self):
        fam, f = setup()
        with pytest.raises(ValueError):
            build_sparse(f, INF, ONE, fam, 1.0)

    def test_eta_grows_with_a(self):
        fam, f = setup(Interval(0, 16), 10, lambda x: np.where(x < 8, np.abs(x - 1.5) ** -0.7, 0.0))
        etas = [build_sparse(f, INF, ONE, fam, a).eta for a in (2, 4, 8, 16)]
        assert all(e2 >= e1 for e1, e2 in zip(etas, etas[1:]))
        assert etas[-1] >= 0.5

    @given(st.integers(0, 2 ** 20), st.sampled_from([2.0, 4.0, 16.0]))
    def test_exact_disjointness_and_nesting(self, seed, a):
        fam = DyadicFamily(Interval(0, 8), 7)
        g = fam.aligned_grid()
        f = GridFunction(g, np.exp(2 * np.random.default_rng(seed).normal(size=g.n_cells)) * (g.midpoints < 6))
        S = build_sparse(f, INF, ONE, fam, a)
        assert S.disjoint and S.nested
        count = np.zeros(g.n_cells, int)
        for _, Q, E in S.carved:
            assert not np.any(E & ~cube_mask(g.midpoints, Q))
            count += E
        assert count.max(initial=0) <= 1
        if S.carved:
            assert S.eta > 0

    def test_json(self):
        fam, f = setup()
        d = json.loads(build_sparse(f, INF, ONE, fam, 4.0).to_json())
        assert set(d) == {"a", "eta", "levels"} and d["levels"][0]["cubes"]


class TestSparseOperator:
    def test_single_cube(self):
        fam, f = setup()
        out = sparse_operator(f, [Interval(0, 1)], INF)
        m = cube_mask(f.grid.midpoints, Interval(0, 1))
        assert np.allclose(out.values[m], 1.0) and np.all(out.values[~m] == 0)

    def test_nested_pair(self):
        fam, f = setup()
        out = sparse_operator(f, [Interval(0, 1), Interval(0, 2)], INF)
        assert out(0.5) == pytest.approx(1.5) and out(1.5) == pytest.approx(0.5)

    def test_fractional_weighting(self):
        fam, f = setup()
        out = sparse_operator(f, [Interval(0, 4)], ex.constant(2))
        assert out(3.0) == pytest.approx(2 * 0.25)

    @pytest.mark.parametrize("seed", range(5))
    def test_dominated_by_levels_times_maximal(self, seed):
        fam = DyadicFamily(Interval(0, 8), 7)
        g = fam.aligned_grid()
        f = GridFunction(g, np.exp(2 * np.random.default_rng(seed).normal(size=g.n_cells)))
        S = build_sparse(f, INF, ONE, fam, 2.0)
        Tf = sparse_operator(f, S, INF)
        M = maximal_profile(f, MaximalConfig(fam.as_cubes(), INF, ONE)).values
        assert np.all(Tf.values <= len(S.levels) * M * (1 + 1e-9))
