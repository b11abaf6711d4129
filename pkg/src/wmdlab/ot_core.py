"""Exact solver for the balanced transportation linear program.

``solve_transport`` runs a network simplex on the bipartite transportation
graph: a spanning-tree basis is built with the northwest-corner rule and
improved by deterministic pivots. The entering arc is the most negative
reduced cost (ties broken by lowest row-major arc index); a streak of
degenerate pivots falls back to Bland's lowest-index rule, which cannot
cycle. The leaving arc is the lowest index among the blocking arcs.

``brute_force_transport`` is a deliberately independent cross-check:
exhaustive vertex enumeration for tiny instances, an LP solve through
SciPy's HiGHS simplex for the rest of its size range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimMismatch,
    InvalidInput,
    NotNormalized,
    SolverStalled,
    TooLarge,
    UnbalancedProblem,
)
from .textrep import SparseVector, _aligned

BALANCE_TOL = 1e-9
BRUTE_FORCE_CELL_LIMIT = 36
# Largest instance routed to exhaustive vertex enumeration; bigger ones
# (still within the cell limit) go through the LP fallback.
ENUMERATION_CELL_LIMIT = 9
_MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class TransportProblem:
    """Balanced transportation instance: supply, demand, and arc costs."""

    supply: np.ndarray
    demand: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        supply = np.atleast_1d(np.asarray(self.supply, dtype=np.float64))
        demand = np.atleast_1d(np.asarray(self.demand, dtype=np.float64))
        cost = np.asarray(self.cost, dtype=np.float64)
        if cost.ndim != 2 or cost.shape != (supply.size, demand.size):
            raise InvalidInput(
                f"cost shape {cost.shape} does not match "
                f"({supply.size}, {demand.size})"
            )
        for name, arr in (("supply", supply), ("demand", demand)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInput(f"{name} contains NaN or infinite entries")
            if np.any(arr < 0):
                raise InvalidInput(f"{name} contains negative entries")
        if not np.all(np.isfinite(cost)):
            raise InvalidInput("cost contains NaN or infinite entries")
        if np.any(cost < 0):
            raise InvalidInput("cost contains negative entries")
        ssum = math.fsum(supply.tolist())
        dsum = math.fsum(demand.tolist())
        if abs(ssum - dsum) > BALANCE_TOL:
            raise UnbalancedProblem(
                f"supply total {ssum!r} and demand total {dsum!r} differ by "
                f"{abs(ssum - dsum):.3e} (> {BALANCE_TOL:.0e})"
            )
        object.__setattr__(self, "supply", supply)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "cost", cost)

    @property
    def n_sources(self) -> int:
        return self.supply.size

    @property
    def n_targets(self) -> int:
        return self.demand.size


@dataclass(frozen=True)
class TransportPlan:
    """Sparse optimal coupling: positive-mass entries plus the optimal value."""

    entries: tuple[tuple[int, int, float], ...]
    objective: float

    def row_sums(self, n_rows: int) -> np.ndarray:
        out = np.zeros(n_rows)
        for i, _, m in self.entries:
            out[i] += m
        return out

    def col_sums(self, n_cols: int) -> np.ndarray:
        out = np.zeros(n_cols)
        for _, j, m in self.entries:
            out[j] += m
        return out

    def to_dense(self, n_rows: int, n_cols: int) -> np.ndarray:
        out = np.zeros((n_rows, n_cols))
        for i, j, m in self.entries:
            out[i, j] = m
        return out


def _repair_balance(problem: TransportProblem) -> tuple[np.ndarray, np.ndarray]:
    """Rescale near-balanced marginals so their totals agree exactly.

    Marginals come from floating-point L1 normalization and rarely balance
    to the last bit; dividing each side by its own total removes the
    mismatch. Exactly balanced inputs are passed through untouched.
    """
    supply, demand = problem.supply, problem.demand
    ssum = math.fsum(supply.tolist())
    dsum = math.fsum(demand.tolist())
    if ssum == dsum or ssum == 0.0 or dsum == 0.0:
        return supply, demand
    return supply / ssum, demand / dsum


def _northwest_corner(
    supply: np.ndarray, demand: np.ndarray
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Initial spanning-tree flow via the staircase walk.

    Returns the flow matrix and the n_s + n_t - 1 basic cells (some may
    carry zero flow on degenerate instances).
    """
    ns, nt = supply.size, demand.size
    flow = np.zeros((ns, nt))
    basis: list[tuple[int, int]] = []
    rs = supply.copy()
    rd = demand.copy()
    i = j = 0
    while True:
        q = min(rs[i], rd[j])
        flow[i, j] = q
        basis.append((i, j))
        rs[i] -= q
        rd[j] -= q
        if i == ns - 1 and j == nt - 1:
            break
        if j == nt - 1 or (rs[i] <= rd[j] and i < ns - 1):
            i += 1
        else:
            j += 1
    return flow, basis


def _tree_duals(
    ns: int,
    nt: int,
    cost: np.ndarray,
    row_adj: list[set[int]],
    col_adj: list[set[int]],
) -> tuple[np.ndarray, np.ndarray]:
    """Potentials u, v with u_i + v_j = c_ij on every basic arc (u_0 = 0)."""
    u = np.empty(ns)
    v = np.empty(nt)
    seen_rows = np.zeros(ns, dtype=bool)
    seen_cols = np.zeros(nt, dtype=bool)
    u[0] = 0.0
    seen_rows[0] = True
    stack: list[tuple[bool, int]] = [(True, 0)]
    while stack:
        is_row, k = stack.pop()
        if is_row:
            for j in row_adj[k]:
                if not seen_cols[j]:
                    v[j] = cost[k, j] - u[k]
                    seen_cols[j] = True
                    stack.append((False, j))
        else:
            for i in col_adj[k]:
                if not seen_rows[i]:
                    u[i] = cost[i, k] - v[k]
                    seen_rows[i] = True
                    stack.append((True, i))
    return u, v


def _tree_path(
    start_row: int,
    end_col: int,
    row_adj: list[set[int]],
    col_adj: list[set[int]],
) -> list[tuple[bool, int]]:
    """Unique tree path from a source node to a target node, as (is_row, index)."""
    parent: dict[tuple[bool, int], tuple[bool, int]] = {}
    start = (True, start_row)
    goal = (False, end_col)
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            break
        is_row, k = node
        nbrs = row_adj[k] if is_row else col_adj[k]
        for n in nbrs:
            nxt = (not is_row, n)
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                stack.append(nxt)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def solve_transport(problem: TransportProblem) -> TransportPlan:
    """Optimal coupling of a balanced transportation instance.

    Zero-mass rows and columns are dropped before solving (they carry no
    transport); the returned entries use the original indices. The
    objective is accumulated with compensated summation.
    """
    supply, demand = _repair_balance(problem)
    rows = np.flatnonzero(supply > 0)
    cols = np.flatnonzero(demand > 0)
    if rows.size == 0 or cols.size == 0:
        return TransportPlan(entries=(), objective=0.0)
    s = supply[rows]
    d = demand[cols]
    cost = problem.cost[np.ix_(rows, cols)]
    ns, nt = s.size, d.size

    flow, basis = _northwest_corner(s, d)
    row_adj: list[set[int]] = [set() for _ in range(ns)]
    col_adj: list[set[int]] = [set() for _ in range(nt)]
    for i, j in basis:
        row_adj[i].add(j)
        col_adj[j].add(i)

    tol = 1e-12 * max(1.0, float(cost.max()))
    max_pivots = 100 * ns * nt + 1000
    # Dantzig entering rule (ties -> lowest arc index) for speed; a run of
    # degenerate pivots switches to Bland's lowest-index rule, which cannot
    # cycle, until an improving pivot occurs.
    bland_threshold = 2 * (ns + nt)
    degenerate_streak = 0
    for _ in range(max_pivots):
        u, v = _tree_duals(ns, nt, cost, row_adj, col_adj)
        reduced = cost - u[:, None] - v[None, :]
        if degenerate_streak < bland_threshold:
            flat = int(np.argmin(reduced.ravel()))
            if reduced.ravel()[flat] >= -tol:
                break
        else:
            negative = reduced.ravel() < -tol
            if not negative.any():
                break
            flat = int(np.argmax(negative))
        ei, ej = divmod(flat, nt)

        path = _tree_path(ei, ej, row_adj, col_adj)
        # Arcs along the path alternate -,+,-,... relative to the entering arc.
        minus_arcs: list[tuple[int, int]] = []
        plus_arcs: list[tuple[int, int]] = []
        for k in range(len(path) - 1):
            (a_row, a), (b_row, b) = path[k], path[k + 1]
            arc = (a, b) if a_row else (b, a)
            (minus_arcs if k % 2 == 0 else plus_arcs).append(arc)
        delta = min(flow[i, j] for i, j in minus_arcs)
        leaving = min(
            (arc for arc in minus_arcs if flow[arc] == delta),
            key=lambda arc: arc[0] * nt + arc[1],
        )
        degenerate_streak = 0 if delta > 0.0 else degenerate_streak + 1
        for i, j in plus_arcs:
            flow[i, j] += delta
        for i, j in minus_arcs:
            flow[i, j] -= delta
        flow[leaving] = 0.0
        flow[ei, ej] = delta
        row_adj[leaving[0]].discard(leaving[1])
        col_adj[leaving[1]].discard(leaving[0])
        row_adj[ei].add(ej)
        col_adj[ej].add(ei)
    else:
        raise SolverStalled(f"no convergence within {max_pivots} pivots")

    entries = []
    terms = []
    for i in range(ns):
        oi = int(rows[i])
        for j in row_adj[i]:
            m = flow[i, j]
            terms.append(cost[i, j] * m)
            if m > 0.0:
                entries.append((oi, int(cols[j]), float(m)))
    entries.sort()
    return TransportPlan(entries=tuple(entries), objective=math.fsum(terms))


def _enumerate_min_cost(
    supply: list[float], demand: list[float], cost: np.ndarray
) -> float:
    """Exhaustive vertex enumeration by peeling leaf nodes of support forests.

    Every vertex of the transportation polytope has forest support, and any
    forest can be dismantled one leaf at a time; at a leaf its single arc
    carries the leaf's full residual. Branching over all (arc, leaf side)
    choices therefore visits every vertex.
    """
    best = math.inf

    def recurse(rows: list[tuple[int, float]], cols: list[tuple[int, float]],
                acc: float) -> None:
        nonlocal best
        if not rows or not cols:
            best = min(best, acc)
            return
        for ri, (i, si) in enumerate(rows):
            for ci, (j, dj) in enumerate(cols):
                c = cost[i, j]
                if si <= dj:
                    rest_rows = rows[:ri] + rows[ri + 1:]
                    new_cols = cols.copy()
                    new_cols[ci] = (j, dj - si)
                    recurse(rest_rows, new_cols, acc + c * si)
                if dj <= si:
                    rest_cols = cols[:ci] + cols[ci + 1:]
                    new_rows = rows.copy()
                    new_rows[ri] = (i, si - dj)
                    recurse(new_rows, rest_cols, acc + c * dj)

    recurse(list(enumerate(supply)), list(enumerate(demand)), 0.0)
    return best


def _linprog_min_cost(s: np.ndarray, d: np.ndarray, cost: np.ndarray) -> float:
    ns, nt = s.size, d.size
    n = ns * nt
    a_eq = np.zeros((ns + nt - 1, n))
    b_eq = np.zeros(ns + nt - 1)
    for i in range(ns):
        a_eq[i, i * nt:(i + 1) * nt] = 1.0
        b_eq[i] = s[i]
    # Last demand constraint is implied by balance; dropping it keeps the
    # system consistent under floating-point marginals.
    for j in range(nt - 1):
        a_eq[ns + j, j::nt] = 1.0
        b_eq[ns + j] = d[j]
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, method="highs")
    if res.status != 0:
        raise SolverStalled(f"LP reference solve failed: {res.message}")
    return float(res.fun)


def brute_force_transport(problem: TransportProblem) -> float:
    """Reference optimum for small instances, independent of solve_transport.

    Instances up to ENUMERATION_CELL_LIMIT cells are solved by exhaustive
    vertex enumeration; larger ones (up to BRUTE_FORCE_CELL_LIMIT cells)
    by an LP solve with a different algorithm family.
    """
    if problem.n_sources * problem.n_targets > BRUTE_FORCE_CELL_LIMIT:
        raise TooLarge(
            f"{problem.n_sources}x{problem.n_targets} exceeds "
            f"{BRUTE_FORCE_CELL_LIMIT} cells"
        )
    supply, demand = _repair_balance(problem)
    rows = np.flatnonzero(supply > 0)
    cols = np.flatnonzero(demand > 0)
    if rows.size == 0 or cols.size == 0:
        return 0.0
    s = supply[rows]
    d = demand[cols]
    cost = problem.cost[np.ix_(rows, cols)]
    if s.size * d.size <= ENUMERATION_CELL_LIMIT:
        return _enumerate_min_cost(s.tolist(), d.tolist(), cost)
    return _linprog_min_cost(s, d, cost)


def uniform_cost_matrix(n: int) -> np.ndarray:
    """Cost matrix with zero diagonal and 2 off the diagonal.

    This is the word-to-word geometry induced by mutually orthogonal unit
    embeddings scaled to diameter 2: staying on a word is free, any move
    costs the maximum.
    """
    return 2.0 * (np.ones((n, n)) - np.eye(n))


def ot_uniform(x: SparseVector, y: SparseVector) -> float:
    """Transport cost between L1-normalized vectors under the uniform geometry.

    Under the 0/2 cost matrix the optimal plan keeps min(x_i, y_i) in place
    for every coordinate, so the optimum collapses to the closed form
    ||x - y||_1; no LP solve is needed.
    """
    if x.dim != y.dim:
        raise DimMismatch(f"dimensions differ: {x.dim} != {y.dim}")
    for name, vec in (("x", x), ("y", y)):
        total = vec.sum()
        if abs(total - 1.0) > _MARGINAL_TOL:
            raise NotNormalized(f"{name} sums to {total!r}, expected 1")
    av, bv = _aligned(x, y)
    return math.fsum(np.abs(av - bv).tolist())
