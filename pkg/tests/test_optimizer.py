"""Grid search, refinement, and the 1-D searches."""

import math

import numpy as np
import pytest

from gldx import (
    Distribution,
    FeasibleSet,
    GridSpec,
    InfeasibleGridError,
    golden_section_minimize,
    grid_maximize,
    grid_minimize,
    refine_joint,
)
from gldx.measures import mutual_information_array
from gldx.optimizer import (
    concave_search_rho,
    enumerate_margin_tables,
    margin_counts,
    move_directions,
    nearest_grid_composition,
    ordered_chunk_map,
)


class TestMarginCounts:
    def test_exact(self):
        c = margin_counts(Distribution([0.25, 0.75]), 8)
        assert c.tolist() == [2, 6]

    def test_off_grid_raises_with_suggestion(self):
        with pytest.raises(InfeasibleGridError) as err:
            margin_counts(Distribution([1 / 3, 2 / 3]), 8)
        assert err.value.suggestion.tolist() == [3, 5]
        assert err.value.suggestion.sum() == 8

    def test_nearest_composition_sums_to_k(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = rng.dirichlet(np.ones(4))
            c = nearest_grid_composition(p, 11)
            assert c.sum() == 11
            assert np.all(c >= 0)


class TestMarginTables:
    def test_margins_hold(self):
        rows = np.array([3, 5])
        cols = np.array([4, 4])
        tables = list(enumerate_margin_tables(rows, cols))
        assert tables
        for t in tables:
            assert np.array_equal(t.sum(axis=1), rows)
            assert np.array_equal(t.sum(axis=0), cols)

    def test_count_2x2(self):
        # 2x2 tables are determined by the (0,0) entry: max(0, r0+c0-k)..min(r0, c0)
        tables = list(enumerate_margin_tables(np.array([3, 5]), np.array([4, 4])))
        assert len(tables) == 4

    def test_lex_order(self):
        tables = list(enumerate_margin_tables(np.array([2, 2]), np.array([2, 2])))
        keys = [tuple(t.reshape(-1)) for t in tables]
        assert keys == sorted(keys)

    def test_mismatched_totals_empty(self):
        assert list(enumerate_margin_tables(np.array([3, 3]), np.array([4, 4]))) == []


class TestGridMinimize:
    def test_finds_product_coupling(self, unif2):
        # entropy-style objective: MI is minimized (0) at the product table
        feas = FeasibleSet((2, 2), unif2, unif2)
        res = grid_minimize(mutual_information_array, feas, GridSpec(8, refine=False))
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(res.argmin, 0.25)

    def test_info_bound_filters(self, unif2):
        feas = FeasibleSet((2, 2), unif2, unif2, info_bound=0.1)
        res = grid_minimize(lambda p: -mutual_information_array(p), feas, GridSpec(8, refine=False))
        # most informative feasible point stays at or under the cap
        assert -res.value <= 0.1 + 1e-9

    def test_infeasible_raises(self, unif2):
        feas = FeasibleSet((2, 2), unif2, unif2, info_bound=0.0)
        # at k=5 the margins (2.5, 2.5) are not integral
        with pytest.raises(InfeasibleGridError):
            grid_minimize(mutual_information_array, feas, GridSpec(5, refine=False))

    def test_tie_breaks_to_first_index(self, unif2):
        feas = FeasibleSet((2, 2), unif2, unif2)
        res = grid_minimize(lambda p: 1.0, feas, GridSpec(4, refine=False))
        assert res.index == 0

    def test_refined_never_worse(self, unif2):
        rng = np.random.default_rng(17)
        cost = rng.standard_normal((2, 2))

        def obj(p):
            return float(np.sum(p * cost) + 3.0 * np.sum((p - 0.25) ** 2))

        feas = FeasibleSet((2, 2), unif2, unif2)
        raw = grid_minimize(obj, feas, GridSpec(6, refine=False))
        ref = grid_minimize(obj, feas, GridSpec(6, refine=True))
        assert ref.value <= raw.value + 1e-15

    def test_maximize_mirrors(self, unif2):
        feas = FeasibleSet((2, 2), unif2, unif2)
        res = grid_maximize(mutual_information_array, feas, GridSpec(8, refine=False))
        assert res.value == pytest.approx(math.log(2), abs=1e-12)


class TestSingleMarginGrid:
    def test_col_margin_only(self):
        # one kernel row per output symbol; margins on the column side hold
        qy = Distribution([0.25, 0.75])
        feas = FeasibleSet((2, 2), row_margin=None, col_margin=qy)
        res = grid_minimize(mutual_information_array, feas, GridSpec(4, refine=False))
        assert np.allclose(res.argmin.sum(axis=0), qy.p)
        assert res.value == pytest.approx(0.0, abs=1e-12)

    def test_off_grid_margin_still_works(self):
        # the pinned side never needs to be on the grid itself
        qy = Distribution([1 / 3, 2 / 3])
        feas = FeasibleSet((2, 2), col_margin=qy)
        res = grid_minimize(mutual_information_array, feas, GridSpec(4, refine=False))
        assert np.allclose(res.argmin.sum(axis=0), qy.p)


class TestRefinement:
    def test_moves_preserve_margins(self, unif2):
        feas = FeasibleSet((2, 3), unif2, Distribution.uniform(3))
        for d in move_directions(feas):
            assert np.allclose(d.sum(axis=1), 0.0)
            assert np.allclose(d.sum(axis=0), 0.0)

    def test_refine_reaches_interior_optimum(self, unif2):
        target = np.array([[0.35, 0.15], [0.15, 0.35]])

        def obj(p):
            return float(np.sum((p - target) ** 2))

        feas = FeasibleSet((2, 2), unif2, unif2)
        start = np.full((2, 2), 0.25)
        val, arg = refine_joint(obj, start, feas, GridSpec(4))
        assert val <= 1e-12
        assert np.allclose(arg, target, atol=1e-5)

    def test_refine_respects_info_bound(self, unif2):
        feas = FeasibleSet((2, 2), unif2, unif2, info_bound=0.05)

        def obj(p):
            return -mutual_information_array(p)

        start = np.full((2, 2), 0.25)
        val, arg = refine_joint(obj, start, feas, GridSpec(4))
        assert mutual_information_array(arg) <= 0.05 + 1e-8


class TestGoldenSection:
    def test_quadratic(self):
        x, f = golden_section_minimize(lambda t: (t - 0.3) ** 2, -1.0, 1.0, 1e-10)
        assert x == pytest.approx(0.3, abs=1e-8)
        assert f == pytest.approx(0.0, abs=1e-15)

    def test_boundary_minimum_exact(self):
        x, f = golden_section_minimize(lambda t: t, 2.0, 5.0, 1e-10)
        assert x == 2.0 and f == 2.0

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            golden_section_minimize(lambda t: t, 1.0, 0.0, 1e-6)

    def test_concave_rho_search(self):
        # piecewise-affine concave: min of two lines, peak at their crossing
        rho_star, val, boundary = concave_search_rho(
            lambda r: min(2.0 + 0.5 * r, 10.0 - 1.5 * r), 1.0, 64.0, 1e-12
        )
        assert rho_star == pytest.approx(4.0, abs=1e-6)
        assert val == pytest.approx(4.0, abs=1e-9)
        assert not boundary

    def test_boundary_flag(self):
        rho_star, _, boundary = concave_search_rho(lambda r: r, 1.0, 8.0, 1e-12)
        assert boundary
        assert rho_star == pytest.approx(8.0, abs=1e-6)


class TestOrderedChunkMap:
    def test_chunk_boundaries_fixed(self):
        calls = []
        ordered_chunk_map(lambda s, e: calls.append((s, e)), 10, 4, 1)
        assert calls == [(0, 4), (4, 8), (8, 10)]

    def test_worker_count_invisible(self):
        fn = lambda s, e: sum(range(s, e))
        assert ordered_chunk_map(fn, 1000, 7, 1) == ordered_chunk_map(fn, 1000, 7, 8)

    def test_empty(self):
        assert ordered_chunk_map(lambda s, e: 1, 0, 4, 2) == []
