"""Tests for the exact transportation-simplex solver and Monge maps."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rppcal import Coupling, MarginalError, component_cost, monge_map, solve_ot

from oracles import brute_force_ot_cost

SEED = 91463


def grid_weights(rng, k, denominator=12):
    """k weights on the 1/denominator grid, each at least one grid step."""
    parts = np.ones(k, dtype=int)
    for _ in range(denominator - k):
        parts[rng.integers(0, k)] += 1
    return parts / float(denominator)


class TestComponentCost:
    def test_identical_components(self):
        assert component_cost((0.0, 1.0), (0.0, 1.0)) == 0.0

    def test_pure_mean_shift(self):
        assert component_cost((3.0, 1.0), (0.0, 1.0)) == 9.0

    def test_standard_deviation_not_variance(self):
        assert_allclose(component_cost((0.0, 4.0), (0.0, 1.0)), 1.0, rtol=1e-15)

    def test_symmetry(self):
        rng = np.random.default_rng(SEED)
        for _ in range(100):
            ci = (rng.uniform(-5, 5), rng.uniform(0.1, 9))
            cj = (rng.uniform(-5, 5), rng.uniform(0.1, 9))
            assert component_cost(ci, cj) == component_cost(cj, ci)
            assert component_cost(ci, cj) >= 0.0


class TestSolveOt:
    def test_single_cell(self):
        coupling = solve_ot([1.0], [1.0], [[2.75]])
        assert_allclose(coupling.pi, [[1.0]])
        assert_allclose(coupling.cost, 2.75)

    def test_zero_cost_diagonal(self):
        coupling = solve_ot([0.5, 0.5], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(coupling.pi, np.diag([0.5, 0.5]), atol=1e-15)
        assert coupling.cost == 0.0

    def test_known_two_by_two_vertex(self):
        coupling = solve_ot([0.7, 0.3], [0.4, 0.6], [[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(coupling.pi, [[0.4, 0.3], [0.0, 0.3]], atol=1e-12)
        assert_allclose(coupling.cost, 0.3, rtol=1e-12)

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(SEED + 1)
        for _ in range(60):
            k = int(rng.integers(1, 4))
            l_n = int(rng.integers(1, 4))
            w_i = grid_weights(rng, k)
            w_j = grid_weights(rng, l_n)
            cost = rng.uniform(0.0, 5.0, size=(k, l_n))
            coupling = solve_ot(w_i, w_j, cost)
            best = brute_force_ot_cost(w_i, w_j, cost.tolist())
            assert abs(coupling.cost - best) <= 1e-9

    def test_feasibility_and_sparsity(self):
        rng = np.random.default_rng(SEED + 2)
        for _ in range(60):
            k = int(rng.integers(1, 7))
            l_n = int(rng.integers(1, 7))
            raw_i = rng.uniform(0.1, 1.0, size=k)
            raw_j = rng.uniform(0.1, 1.0, size=l_n)
            w_i = raw_i / raw_i.sum()
            w_j = raw_j / raw_j.sum()
            cost = rng.uniform(0.0, 9.0, size=(k, l_n))
            coupling = solve_ot(w_i, w_j, cost)
            assert np.all(coupling.pi >= 0.0)
            assert_allclose(coupling.pi.sum(axis=1), w_i, atol=1e-10)
            assert_allclose(coupling.pi.sum(axis=0), w_j, atol=1e-10)
            assert_allclose(coupling.cost, float((coupling.pi * cost).sum()), atol=1e-10)
            assert np.count_nonzero(coupling.pi) <= k + l_n - 1

    def test_rejects_bad_marginals(self):
        with pytest.raises(MarginalError):
            solve_ot([0.5, 0.4], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(MarginalError):
            solve_ot([1.2, -0.2], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])

    def test_coupling_type_checks_mass(self):
        with pytest.raises(MarginalError):
            Coupling(
                pi=((0.5, 0.0), (0.0, 0.4)),
                cost=0.0,
                row_marginal=(0.5, 0.5),
                col_marginal=(0.5, 0.5),
            )


class TestMongeMap:
    def test_identity(self):
        assert monge_map((0.0, 1.0), (0.0, 1.0), 0.7) == 0.7

    def test_mean_maps_to_mean(self):
        assert monge_map((1.0, 1.0), (5.0, 4.0), 1.0) == 5.0

    def test_scale_factor(self):
        assert_allclose(monge_map((0.0, 1.0), (0.0, 4.0), 1.3), 2.6, rtol=1e-15)

    def test_pushforward_matches_target_moments(self):
        rng = np.random.default_rng(SEED + 3)
        ci = (1.0, 4.0)
        cj = (-2.0, 0.25)
        n = 100_000
        x = rng.normal(ci[0], np.sqrt(ci[1]), size=n)
        # The map is affine, so two evaluations determine it exactly.
        at_zero = monge_map(ci, cj, 0.0)
        slope = monge_map(ci, cj, 1.0) - at_zero
        y = at_zero + slope * x
        mean_sd = np.sqrt(cj[1] / n)
        var_sd = cj[1] * np.sqrt(2.0 / (n - 1))
        assert abs(y.mean() - cj[0]) <= 3.0 * mean_sd
        assert abs(y.var(ddof=1) - cj[1]) <= 3.0 * var_sd
