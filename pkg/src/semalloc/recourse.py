"""First-stage decisions, second-stage recourse and decision evaluation.

:func:`evaluate_decision` is the single place where the cost and energy of a
decision are computed. Both solvers report through it, so two solvers that
pick the same decision produce bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .energy import EnergyLedger, LedgerBuilder
from .errors import InfeasibleError, ValidationError
from .model import MarketConfig
from .scenarios import Scenario, ScenarioSet


@dataclass(frozen=True)
class FirstStageDecision:
    """Reservation plan: ``membership[v][e]`` and ``bundles[v][e]`` per (VSP, device)."""

    membership: tuple[tuple[bool, ...], ...]
    bundles: tuple[tuple[int, ...], ...]

    @classmethod
    def empty(cls, config: MarketConfig) -> "FirstStageDecision":
        row_m = (False,) * config.n_devices
        row_b = (0,) * config.n_devices
        return cls((row_m,) * config.n_vsps, (row_b,) * config.n_vsps)

    @classmethod
    def from_lists(cls, membership: Sequence[Sequence[bool]], bundles: Sequence[Sequence[int]]):
        return cls(tuple(tuple(bool(x) for x in row) for row in membership),
                   tuple(tuple(int(x) for x in row) for row in bundles))

    def mask(self, v: int) -> int:
        """Membership of VSP ``v`` as a bitmask, device ``e`` in bit ``e``."""
        return sum(1 << e for e, m in enumerate(self.membership[v]) if m)

    def key(self) -> tuple:
        """Tie-break order: per-VSP membership bitmasks, then the flattened bundle vector."""
        return (tuple(self.mask(v) for v in range(len(self.membership))),
                tuple(k for row in self.bundles for k in row))

    def capacity(self, v: int, config: MarketConfig) -> int:
        return sum(config.devices[e].bundle_size * k for e, k in enumerate(self.bundles[v]))


@dataclass(frozen=True)
class RecoursePlan:
    """On-demand transmissions ``on_demand[v][e][s]``."""

    on_demand: tuple[tuple[tuple[int, ...], ...], ...]

    def scenario(self, s: int) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(per_s[s] for per_s in row) for row in self.on_demand)


@dataclass(frozen=True)
class SolveResult:
    """A decision together with its evaluated costs and expected energy."""

    decision: FirstStageDecision
    recourse: RecoursePlan
    scenarios: ScenarioSet
    first_stage_cost: float
    expected_recourse_cost: float
    per_scenario_cost: tuple[float, ...]
    energy: EnergyLedger
    expected_transmissions: float

    @property
    def expected_cost(self) -> float:
        return self.first_stage_cost + self.expected_recourse_cost


def check_decision(decision: FirstStageDecision, config: MarketConfig) -> None:
    """Raise :class:`ValidationError` unless ``decision`` fits ``config``."""
    V, E = config.n_vsps, config.n_devices
    if len(decision.membership) != V or len(decision.bundles) != V \
            or any(len(r) != E for r in decision.membership) or any(len(r) != E for r in decision.bundles):
        raise ValidationError("decision", f"expected {V}x{E} membership and bundle matrices")
    for v in range(V):
        for e in range(E):
            where = f"decision[{config.vsps[v].id}][{config.devices[e].id}]"
            k = decision.bundles[v][e]
            if k < 0:
                raise ValidationError(where, f"negative bundle count {k}")
            if k > config.bundle_cap:
                raise ValidationError(where, f"{k} bundles exceeds bundle_cap {config.bundle_cap}")
            if k > 0 and not decision.membership[v][e]:
                raise ValidationError(where, "bundles bought without membership")
            if decision.membership[v][e] and not config.eligible[v][e]:
                raise ValidationError(where, "membership at a semantically ineligible device")


def first_stage_cost(decision: FirstStageDecision, config: MarketConfig) -> float:
    terms = []
    for v in range(config.n_vsps):
        for e, dev in enumerate(config.devices):
            if decision.membership[v][e]:
                terms.append(dev.membership_cost)
            if decision.bundles[v][e]:
                terms.append(dev.bundle_cost * decision.bundles[v][e])
    return math.fsum(terms)


def optimal_recourse(
    decision: FirstStageDecision,
    scenario: Scenario | Sequence[int],
    config: MarketConfig,
) -> tuple[tuple[tuple[int, ...], ...], float]:
    """Cheapest on-demand top-up for one demand realisation.

    Each VSP's shortfall goes entirely to its eligible device with the
    lowest on-demand price. Membership is not required for on-demand
    purchases.

    Returns:
        (``on_demand[v][e]`` for this scenario, recourse cost)
    """
    demand = scenario.demand if isinstance(scenario, Scenario) else tuple(scenario)
    plan = [[0] * config.n_devices for _ in range(config.n_vsps)]
    terms = []
    for v in range(config.n_vsps):
        shortfall = max(0, demand[v] - decision.capacity(v, config))
        if shortfall == 0:
            continue
        e = config.recourse_device(v)
        if e is None:
            raise InfeasibleError(
                f"VSP {config.vsps[v].id!r} is short {shortfall} transmissions and has no eligible device"
            )
        plan[v][e] = shortfall
        terms.append(shortfall * config.devices[e].on_demand_cost)
    return tuple(tuple(r) for r in plan), math.fsum(terms)


def _scenario_energy(decision, plan, demand, config, ledger: LedgerBuilder) -> int:
    """Book one scenario's transmissions into ``ledger``; returns the count."""
    count = 0
    for v, vsp in enumerate(config.vsps):
        # reserved capacity is drawn lowest-energy device first
        order = sorted((e for e in range(config.n_devices) if decision.bundles[v][e]),
                       key=lambda e: (config.unit_energy(v, e), e))
        remaining = demand[v]
        for e in order:
            used = min(remaining, decision.bundles[v][e] * config.devices[e].bundle_size)
            if used:
                ledger.add(config.devices[e].id, vsp.id, used * config.unit_energy(v, e))
            remaining -= used
            count += used
        for e, n in enumerate(plan[v]):
            if n:
                ledger.add(config.devices[e].id, vsp.id, n * config.unit_energy(v, e))
                count += n
    return count


def evaluate_decision(
    decision: FirstStageDecision,
    scenarios: ScenarioSet | None,
    config: MarketConfig,
) -> SolveResult:
    """Expected cost and expected transmission energy of ``decision``.

    ``scenarios`` defaults to the config's own set; pass another set for
    out-of-sample evaluation.
    """
    check_decision(decision, config)
    scenarios = config.scenarios if scenarios is None else scenarios.align(config.vsp_ids)
    first = first_stage_cost(decision, config)
    per_plan, rec_costs = [], []
    ledger = LedgerBuilder(config.device_ids, config.vsp_ids)
    counts = []
    for s in scenarios:
        plan, cost = optimal_recourse(decision, s, config)
        per_plan.append(plan)
        rec_costs.append(cost)
        one = LedgerBuilder(config.device_ids, config.vsp_ids)
        counts.append(s.probability * _scenario_energy(decision, plan, s.demand, config, one))
        ledger.merge(one, s.probability)
    expected_recourse = math.fsum(s.probability * c for s, c in zip(scenarios, rec_costs))
    on_demand = tuple(
        tuple(tuple(per_plan[s][v][e] for s in range(len(per_plan))) for e in range(config.n_devices))
        for v in range(config.n_vsps)
    )
    return SolveResult(
        decision=decision,
        recourse=RecoursePlan(on_demand),
        scenarios=scenarios,
        first_stage_cost=first,
        expected_recourse_cost=expected_recourse,
        per_scenario_cost=tuple(first + c for c in rec_costs),
        energy=ledger.build(),
        expected_transmissions=math.fsum(counts),
    )


def demand_violations(result: SolveResult, config: MarketConfig) -> list[str]:
    """Audit a result: every broken demand or linking constraint, as text."""
    problems = []
    d = result.decision
    for v in range(config.n_vsps):
        for e in range(config.n_devices):
            if d.bundles[v][e] > 0 and not d.membership[v][e]:
                problems.append(f"linking v={v} e={e}")
        cap = d.capacity(v, config)
        for s, sc in enumerate(result.scenarios):
            supplied = cap + sum(result.recourse.on_demand[v][e][s] for e in range(config.n_devices))
            if supplied < sc.demand[v]:
                problems.append(f"demand v={v} s={s}: {supplied} < {sc.demand[v]}")
    return problems
