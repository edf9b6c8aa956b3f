"""Baseline policies and the stochastic-vs-baseline cost comparison.

Policies compared:

``SIP``
    the stochastic optimum from :func:`semalloc.sip.solve_structural`.
``EVF``
    expected-value formulation: plan for the (rounded-up) mean demand as if
    it were certain, then face the real scenarios with that plan.
``random``
    uniformly random reservations over the feasible box, reported as the
    mean and the best over ``random_trials`` draws.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import MarketConfig
from .recourse import FirstStageDecision, SolveResult, evaluate_decision
from .scenarios import Scenario, ScenarioSet, sample_scenarios
from .sip import solve_structural

__all__ = [
    "PolicyRow",
    "PolicyComparison",
    "evaluate_decision",
    "solve_evf",
    "random_policy",
    "trial_seeds",
    "compare",
]


def mean_value_scenarios(scenarios: ScenarioSet) -> ScenarioSet:
    """Collapse a scenario set to one certain scenario at the mean demand, rounded up."""
    # the small offset keeps float noise such as 50.000000000001 from rounding up
    demand = tuple(max(0, math.ceil(m - 1e-9)) for m in scenarios.mean_demand())
    return ScenarioSet(scenarios.vsp_ids, (Scenario(1.0, demand),), source="mean-value")


def solve_evf(config: MarketConfig) -> tuple[FirstStageDecision, float]:
    """EVF decision and the cost it *believes* it will incur (at mean demand)."""
    deterministic = solve_structural(config.with_scenarios(mean_value_scenarios(config.scenarios)))
    return deterministic.decision, deterministic.expected_cost


def random_policy(config: MarketConfig, seed: int) -> FirstStageDecision:
    """Random reservation: each eligible pair joins with probability 1/2 and an
    active pair buys a uniform number of bundles in [0, bundle_cap]."""
    rng = np.random.default_rng(seed)
    membership = [[False] * config.n_devices for _ in range(config.n_vsps)]
    bundles = [[0] * config.n_devices for _ in range(config.n_vsps)]
    for v in range(config.n_vsps):
        for e in range(config.n_devices):
            if not config.eligible[v][e]:
                continue
            if rng.random() < 0.5:
                membership[v][e] = True
                bundles[v][e] = int(rng.integers(0, config.bundle_cap + 1))
    return FirstStageDecision.from_lists(membership, bundles)


def trial_seeds(seed: int, trials: int) -> list[int]:
    """Independent per-trial seeds derived from a master seed."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(trials)]


@dataclass(frozen=True)
class PolicyRow:
    name: str
    first_stage_cost: float
    expected_recourse_cost: float
    expected_total_cost: float
    energy_joules: float

    @classmethod
    def from_result(cls, name: str, result: SolveResult) -> "PolicyRow":
        return cls(name, result.first_stage_cost, result.expected_recourse_cost,
                   result.expected_cost, result.energy.total_joules)


@dataclass(frozen=True)
class PolicyComparison:
    """Policies sorted by expected total cost, plus the value of the stochastic solution."""

    policies: tuple[PolicyRow, ...]
    vss: float
    random_trials: int
    seed: int
    evaluation: str = "in-sample"
    evf_planned_cost: float = 0.0

    def row(self, name: str) -> PolicyRow:
        for r in self.policies:
            if r.name == name:
                return r
        raise KeyError(name)


def _worker_count(requested: int | None) -> int:
    if requested is None:
        requested = int(os.environ.get("SEMALLOC_THREADS", "1") or 1)
    return requested if requested > 0 else (os.cpu_count() or 1)


def compare(
    config: MarketConfig,
    random_trials: int = 100,
    seed: int = 0,
    holdout: ScenarioSet | None = None,
    workers: int | None = None,
) -> PolicyComparison:
    """Run SIP, EVF and ``random_trials`` random policies on the same scenarios.

    Decisions are always made from ``config.scenarios``. They are scored on
    ``holdout`` if given, otherwise on ``config.scenarios``. In-sample, the
    value of the stochastic solution is nonnegative by optimality; on a
    holdout set it may not be.
    """
    if random_trials < 1:
        raise ValidationError("random_trials", "must be >= 1")
    scored_on = config.scenarios if holdout is None else holdout.align(config.vsp_ids)

    sip = evaluate_decision(solve_structural(config).decision, scored_on, config)
    evf_decision, evf_planned = solve_evf(config)
    evf = evaluate_decision(evf_decision, scored_on, config)

    def run_trial(trial_seed: int) -> SolveResult:
        return evaluate_decision(random_policy(config, trial_seed), scored_on, config)

    seeds = trial_seeds(seed, random_trials)
    n_workers = _worker_count(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            randoms = list(pool.map(run_trial, seeds))
    else:
        randoms = [run_trial(s) for s in seeds]

    random_rows = [PolicyRow.from_result("random", r) for r in randoms]
    mean_row = PolicyRow(
        "random-mean",
        math.fsum(r.first_stage_cost for r in random_rows) / random_trials,
        math.fsum(r.expected_recourse_cost for r in random_rows) / random_trials,
        math.fsum(r.expected_total_cost for r in random_rows) / random_trials,
        math.fsum(r.energy_joules for r in random_rows) / random_trials,
    )
    best = min(random_rows, key=lambda r: r.expected_total_cost)
    min_row = PolicyRow("random-min", best.first_stage_cost, best.expected_recourse_cost,
                        best.expected_total_cost, best.energy_joules)

    rows = [PolicyRow.from_result("SIP", sip), PolicyRow.from_result("EVF", evf), mean_row, min_row]
    order = {"SIP": 0, "EVF": 1, "random-min": 2, "random-mean": 3}
    rows.sort(key=lambda r: (r.expected_total_cost, order[r.name]))
    vss = evf.expected_cost - sip.expected_cost
    return PolicyComparison(
        policies=tuple(rows),
        vss=vss,
        random_trials=random_trials,
        seed=seed,
        evaluation="in-sample" if holdout is None else f"holdout({len(scored_on)})",
        evf_planned_cost=evf_planned,
    )


def holdout_scenarios(config: MarketConfig, seed: int, count: int | None = None) -> ScenarioSet:
    """Fresh scenarios from the config's ``scenario_spec`` for out-of-sample scoring."""
    spec = config.scenario_spec
    if spec is None:
        raise ValidationError("scenario_spec", "holdout evaluation needs a scenario_spec in the config")
    # mix in scenario_spec.seed so the holdout stream never replays the in-sample one
    stream = int(np.random.SeedSequence([spec.seed, seed, 1]).generate_state(1)[0])
    return sample_scenarios(spec, stream, count or spec.count)
