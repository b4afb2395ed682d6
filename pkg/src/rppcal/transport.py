"""Discrete optimal transport between mixture components.

A plain transportation simplex: northwest-corner start, dual variables from
the basis tree, stepping-stone pivots with Bland's rule so degenerate bases
cannot cycle.  Problems here are tiny (components of two mixtures), so
clarity wins over sparse-matrix cleverness.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, MarginalError, ParamError

__all__ = ["Coupling", "component_cost", "solve_ot", "monge_map"]

_FEAS_TOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    """An optimal transport plan between two weight vectors.

    ``pi[k, l]`` is the mass moved from source component k to target
    component l; ``cost`` is the total transport cost of the plan.
    """

    pi: np.ndarray
    cost: float
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.ndim != 2:
            raise ParamError(f"plan must be a matrix, got ndim={pi.ndim}")
        if np.any(pi < -_FEAS_TOL):
            raise MarginalError("plan has negative mass")
        rows = pi.sum(axis=1)
        cols = pi.sum(axis=0)
        if np.max(np.abs(rows - self.row_marginal)) > _FEAS_TOL:
            raise MarginalError("plan row sums do not match the source weights")
        if np.max(np.abs(cols - self.col_marginal)) > _FEAS_TOL:
            raise MarginalError("plan column sums do not match the target weights")

    def support(self) -> list[tuple[int, int]]:
        """Indices of the cells carrying positive mass."""
        ks, ls = np.nonzero(self.pi > 0.0)
        return list(zip(ks.tolist(), ls.tolist()))


def component_cost(comp_i: tuple[float, float], comp_j: tuple[float, float]) -> float:
    """Squared 2-Wasserstein distance between two Gaussian components.

    Components are (mu, var) pairs; the distance combines the mean gap and
    the standard-deviation gap.
    """
    mu_i, var_i = comp_i
    mu_j, var_j = comp_j
    if not (math.isfinite(var_i) and var_i > 0.0 and math.isfinite(var_j) and var_j > 0.0):
        raise ParamError(f"component variances must be positive, got {var_i}, {var_j}")
    return (mu_i - mu_j) ** 2 + (math.sqrt(var_i) - math.sqrt(var_j)) ** 2


def _northwest_corner(w_i: np.ndarray, w_j: np.ndarray):
    """Initial basic feasible plan with exactly K + L - 1 basic cells."""
    k_n, l_n = w_i.size, w_j.size
    alloc = np.zeros((k_n, l_n))
    basis: list[tuple[int, int]] = []
    remaining_i = w_i.copy()
    remaining_j = w_j.copy()
    i = j = 0
    while True:
        move = min(remaining_i[i], remaining_j[j])
        alloc[i, j] = move
        basis.append((i, j))
        remaining_i[i] -= move
        remaining_j[j] -= move
        if len(basis) == k_n + l_n - 1:
            break
        if remaining_i[i] == 0.0 and i < k_n - 1:
            i += 1
        elif j < l_n - 1:
            j += 1
        else:
            i += 1
    return alloc, basis


def _duals(basis, cost, k_n, l_n):
    """Potentials u, v with u[i] + v[j] = cost[i, j] on every basic cell."""
    adj: dict[int, list[tuple[int, tuple[int, int]]]] = {n: [] for n in range(k_n + l_n)}
    for (i, j) in basis:
        adj[i].append((k_n + j, (i, j)))
        adj[k_n + j].append((i, (i, j)))
    u = np.full(k_n, np.nan)
    v = np.full(l_n, np.nan)
    u[0] = 0.0
    queue = deque([0])
    seen = {0}
    while queue:
        node = queue.popleft()
        for nbr, (ci, cj) in adj[node]:
            if nbr in seen:
                continue
            seen.add(nbr)
            if nbr >= k_n:
                v[nbr - k_n] = cost[ci, cj] - u[ci]
            else:
                u[nbr] = cost[ci, cj] - v[cj]
            queue.append(nbr)
    if len(seen) != k_n + l_n:
        raise ConvergenceError("basis does not span the transportation graph")
    return u, v


def _cycle_path(basis, enter, k_n):
    """Cells on the tree path closing the cycle for the entering cell."""
    adj: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for (i, j) in basis:
        adj.setdefault(i, []).append((k_n + j, (i, j)))
        adj.setdefault(k_n + j, []).append((i, (i, j)))
    start, goal = enter[0], k_n + enter[1]
    parent: dict[int, tuple[int, tuple[int, int]]] = {start: (-1, (-1, -1))}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nbr, cell in adj.get(node, []):
            if nbr in parent:
                continue
            parent[nbr] = (node, cell)
            queue.append(nbr)
    path = []
    node = goal
    while node != start:
        prev, cell = parent[node]
        path.append(cell)
        node = prev
    path.reverse()
    return path


def solve_ot(weights_i, weights_j, cost_matrix) -> Coupling:
    """Minimum-cost coupling of two weight vectors under the given cell costs.

    Args:
        weights_i: Source weights, non-negative, summing to 1 within 1e-10.
        weights_j: Target weights, same constraints.
        cost_matrix: Finite costs, shape (len(weights_i), len(weights_j)).

    Returns:
        A :class:`Coupling` whose plan is a vertex of the transportation
        polytope (at most K + L - 1 cells carry mass).

    Raises:
        ParamError: On malformed inputs.
        MarginalError: If a weight vector has negative entries or does not
            sum to 1.
        ConvergenceError: If the pivot budget is exhausted (should not
            happen; Bland's rule rules out cycling).
    """
    w_i = np.asarray(weights_i, dtype=float)
    w_j = np.asarray(weights_j, dtype=float)
    cost = np.asarray(cost_matrix, dtype=float)
    if w_i.ndim != 1 or w_j.ndim != 1 or w_i.size == 0 or w_j.size == 0:
        raise ParamError("weight vectors must be non-empty and one-dimensional")
    if not (np.all(np.isfinite(w_i)) and np.all(np.isfinite(w_j))):
        raise ParamError("weights must be finite")
    if np.any(w_i < 0.0) or np.any(w_j < 0.0):
        raise MarginalError("weights must be non-negative")
    if abs(float(w_i.sum()) - 1.0) > _FEAS_TOL or abs(float(w_j.sum()) - 1.0) > _FEAS_TOL:
        raise MarginalError("weights must sum to 1")
    if cost.shape != (w_i.size, w_j.size) or not np.all(np.isfinite(cost)):
        raise ParamError(f"cost matrix must be finite with shape {(w_i.size, w_j.size)}")

    k_n, l_n = w_i.size, w_j.size
    alloc, basis = _northwest_corner(w_i, w_j)
    rc_tol = 1e-12 * max(1.0, float(np.max(np.abs(cost))))

    for _ in range(20 * k_n * l_n * (k_n + l_n) + 100):
        u, v = _duals(basis, cost, k_n, l_n)
        reduced = cost - u[:, None] - v[None, :]
        in_basis = np.zeros((k_n, l_n), dtype=bool)
        for (i, j) in basis:
            in_basis[i, j] = True
        reduced[in_basis] = 0.0
        enter = None
        # Bland's rule: first eligible cell in row-major order.
        for i in range(k_n):
            for j in range(l_n):
                if not in_basis[i, j] and reduced[i, j] < -rc_tol:
                    enter = (i, j)
                    break
            if enter is not None:
                break
        if enter is None:
            break

        path = _cycle_path(basis, enter, k_n)
        givers = path[0::2]
        takers = path[1::2]
        delta = min(alloc[c] for c in givers)
        leave = min(c for c in givers if alloc[c] == delta)
        alloc[enter] += delta
        for c in givers:
            alloc[c] -= delta
        for c in takers:
            alloc[c] += delta
        alloc[leave] = 0.0
        basis[basis.index(leave)] = enter
    else:
        raise ConvergenceError("transport pivot budget exhausted")

    np.clip(alloc, 0.0, None, out=alloc)
    total_cost = float(np.sum(alloc * cost))
    return Coupling(pi=alloc, cost=total_cost, row_marginal=w_i.copy(), col_marginal=w_j.copy())


def monge_map(comp_i: tuple[float, float], comp_j: tuple[float, float], x: float) -> float:
    """Image of ``x`` under the affine map sending one Gaussian onto another."""
    mu_i, var_i = comp_i
    mu_j, var_j = comp_j
    if not (math.isfinite(var_i) and var_i > 0.0 and math.isfinite(var_j) and var_j > 0.0):
        raise ParamError(f"component variances must be positive, got {var_i}, {var_j}")
    return mu_j + math.sqrt(var_j / var_i) * (x - mu_i)
