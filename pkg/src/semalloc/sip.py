"""Exact solvers for the two-stage reservation / on-demand program.

First stage: membership ``m[v,e]`` in {0,1} and bundles ``k[v,e]`` in
{0..bundle_cap} with ``k > 0 => m = 1``, allowed only on eligible pairs.
Second stage: per scenario, the shortfall of each VSP is bought on demand
(see :func:`semalloc.recourse.optimal_recourse`). Objective: membership +
bundle cost + expected on-demand cost.

Two solvers return the same optimum under the same tie-break:

* :func:`solve_enumeration` visits every (membership, bundle) combination of
  every eligible pair jointly. It is the reference oracle.
* :func:`solve_structural` splits by VSP (devices are uncapacitated, so VSPs
  do not interact). Within a VSP, for each membership subset, a bounded
  knapsack gives the cheapest way to reserve every capacity ``Q``; the
  objective is then a one-dimensional newsvendor scan over ``Q``.

Among decisions whose cost is within ``TIE_RTOL`` (relative) of the optimum,
both pick the smallest :meth:`FirstStageDecision.key`.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BudgetExceededError, InfeasibleError
from .model import MarketConfig
from .recourse import FirstStageDecision, SolveResult, evaluate_decision

DEFAULT_BUDGET = 10**7
TIE_RTOL = 1e-10
_CHUNK = 1 << 18


def _tol(best: float) -> float:
    return TIE_RTOL * max(1.0, abs(best))


def _recourse_unit_costs(config: MarketConfig) -> np.ndarray:
    out = np.full(config.n_vsps, np.inf)
    for v in range(config.n_vsps):
        e = config.recourse_device(v)
        if e is not None:
            out[v] = config.devices[e].on_demand_cost
    return out


def _expected_shortfall_cost(unit_cost: float, demand: np.ndarray, prob: np.ndarray,
                             capacity: np.ndarray) -> np.ndarray:
    """Expected on-demand cost for each reserved capacity in ``capacity``."""
    short = np.maximum(0, demand[None, :] - capacity[:, None]).astype(float)
    if np.isinf(unit_cost):
        return np.where(short.any(axis=1), np.inf, 0.0)
    return unit_cost * (short @ prob)


# --------------------------------------------------------------------------- enumeration

def search_space_size(config: MarketConfig) -> int:
    pairs = sum(sum(row) for row in config.eligible)
    return (config.bundle_cap + 2) ** pairs


def _enumerate(config: MarketConfig, pairs, unit_cost, demand, prob):
    """Yield (subset, active pair indices, bundle grid, total cost) chunks."""
    cap = config.bundle_cap
    V = config.n_vsps
    for subset in range(1 << len(pairs)):
        active = [j for j in range(len(pairs)) if subset >> j & 1]
        fixed = math.fsum(config.devices[pairs[j][1]].membership_cost for j in active)
        bcost = np.array([config.devices[pairs[j][1]].bundle_cost for j in active])
        sizes = np.zeros((len(active), V))
        for col, j in enumerate(active):
            v, e = pairs[j]
            sizes[col, v] = config.devices[e].bundle_size
        n_rows = (cap + 1) ** len(active)
        shape = (cap + 1,) * len(active)
        for start in range(0, n_rows, _CHUNK):
            idx = np.arange(start, min(n_rows, start + _CHUNK))
            if active:
                grid = np.stack(np.unravel_index(idx, shape), axis=1)
            else:
                grid = np.zeros((len(idx), 0), dtype=np.int64)
            total = fixed + grid @ bcost
            capacity = grid @ sizes
            for v in range(V):
                total = total + _expected_shortfall_cost(unit_cost[v], demand[v], prob, capacity[:, v])
            yield subset, active, grid, total


def solve_enumeration(config: MarketConfig, budget: int = DEFAULT_BUDGET) -> SolveResult:
    """Globally optimal decision by exhaustive search.

    Raises:
        BudgetExceededError: if ``(bundle_cap + 2) ** eligible_pairs > budget``.
        InfeasibleError: if no decision covers every scenario.
    """
    nodes = search_space_size(config)
    if nodes > budget:
        raise BudgetExceededError(
            f"enumeration needs {nodes} nodes, budget is {budget}; use the structural solver"
        )
    pairs = [(v, e) for v in range(config.n_vsps) for e in range(config.n_devices) if config.eligible[v][e]]
    unit_cost = _recourse_unit_costs(config)
    demand = config.scenarios.demand_matrix()
    prob = config.scenarios.probabilities

    best = min(float(total.min()) for *_, total in _enumerate(config, pairs, unit_cost, demand, prob))
    if math.isinf(best):
        raise InfeasibleError("no first-stage decision covers every scenario")
    limit = best + _tol(best)

    best_key, best_decision = None, None
    for subset, active, grid, total in _enumerate(config, pairs, unit_cost, demand, prob):
        for row in np.flatnonzero(total <= limit):
            membership = [[False] * config.n_devices for _ in range(config.n_vsps)]
            bundles = [[0] * config.n_devices for _ in range(config.n_vsps)]
            for col, j in enumerate(active):
                v, e = pairs[j]
                membership[v][e] = True
                bundles[v][e] = int(grid[row, col])
            decision = FirstStageDecision.from_lists(membership, bundles)
            key = decision.key()
            if best_key is None or key < best_key:
                best_key, best_decision = key, decision
    return evaluate_decision(best_decision, config.scenarios, config)


# --------------------------------------------------------------------------- structural

def _min_cost_by_capacity(members, config: MarketConfig) -> list[np.ndarray]:
    """Suffix tables: ``tables[j][Q]`` = cheapest bundle spend on ``members[j:]``
    reserving exactly ``Q`` transmissions (inf if unreachable)."""
    cap = config.bundle_cap
    tables = [np.zeros(1)]
    for e in reversed(members):
        n = config.devices[e].bundle_size
        b = config.devices[e].bundle_cost
        prev = tables[0]
        cur = np.full(len(prev) + n * cap, np.inf)
        for k in range(cap + 1):
            seg = cur[n * k:n * k + len(prev)]
            np.minimum(seg, prev + b * k, out=seg)
        tables.insert(0, cur)
    return tables


def _solve_one_vsp(config: MarketConfig, v: int) -> tuple[int, list[int]]:
    """Optimal (membership bitmask, bundle row) for VSP ``v`` alone."""
    eligible = config.eligible_devices(v)
    unit = _recourse_unit_costs(config)[v]
    demand = config.scenarios.demand_matrix()[v]
    prob = config.scenarios.probabilities

    def recourse(capacity: np.ndarray) -> np.ndarray:
        return _expected_shortfall_cost(unit, demand, prob, capacity)

    options = []
    for sub in range(1 << len(eligible)):
        members = [eligible[j] for j in range(len(eligible)) if sub >> j & 1]
        mask = sum(1 << e for e in members)
        fixed = math.fsum(config.devices[e].membership_cost for e in members)
        tables = _min_cost_by_capacity(members, config)
        g = fixed + tables[0] + recourse(np.arange(len(tables[0])))
        options.append((mask, members, fixed, tables, float(g.min())))

    best = min(opt[-1] for opt in options)
    if math.isinf(best):
        raise InfeasibleError(f"VSP {config.vsps[v].id!r} cannot be served in every scenario")
    limit = best + _tol(best)
    mask, members, fixed, tables, _ = min((o for o in options if o[-1] <= limit), key=lambda o: o[0])

    # lexicographically smallest bundle vector that still reaches the optimum
    row = [0] * config.n_devices
    spent, reserved = fixed, 0
    for j, e in enumerate(members):
        n = config.devices[e].bundle_size
        b = config.devices[e].bundle_cost
        rest = tables[j + 1]
        for k in range(config.bundle_cap + 1):
            totals = spent + b * k + rest + recourse(reserved + n * k + np.arange(len(rest)))
            if totals.min() <= limit:
                break
        row[e] = k
        spent += b * k
        reserved += n * k
    return mask, row


def solve_structural(config: MarketConfig) -> SolveResult:
    """Optimal decision via per-VSP decomposition and a capacity scan.

    Cost is O(V * 2^E * S * Q) with Q the largest reservable capacity.
    """
    membership, bundles = [], []
    for v in range(config.n_vsps):
        mask, row = _solve_one_vsp(config, v)
        membership.append([bool(mask >> e & 1) for e in range(config.n_devices)])
        bundles.append(row)
    decision = FirstStageDecision.from_lists(membership, bundles)
    return evaluate_decision(decision, config.scenarios, config)


def solve(config: MarketConfig, solver: str = "structural", budget: int = DEFAULT_BUDGET) -> SolveResult:
    if solver == "enumeration":
        return solve_enumeration(config, budget)
    if solver == "structural":
        return solve_structural(config)
    raise ValueError(f"unknown solver {solver!r}")
