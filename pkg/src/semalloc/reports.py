"""Serialisation of results to JSON and CSV.

All floats are written with exactly nine decimals so that identical runs
produce byte-identical files on every platform.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Mapping

from .baselines import PolicyComparison
from .energy import energy_efficiency, energy_per_transmission, pue, transmission_energy
from .errors import ValidationError
from .model import MarketConfig
from .recourse import FirstStageDecision, SolveResult

DECIMALS = 9


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    text = f"{x:.{DECIMALS}f}"
    return text[1:] if text.startswith("-") and not text.strip("-0.") else text


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with fixed-precision floats; key order is preserved."""
    return _render(obj, 0, indent) + "\n"


def _render(obj: Any, level: int, indent: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_render(v, level + 1, indent)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, bool)) for x in obj):
            return "[" + ", ".join(_render(x, level + 1, indent) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + _render(x, level + 1, indent) for x in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# --------------------------------------------------------------------------- decisions

def decision_to_dict(decision: FirstStageDecision, config: MarketConfig) -> dict:
    return {
        "vsp_ids": list(config.vsp_ids),
        "device_ids": list(config.device_ids),
        "membership": [list(r) for r in decision.membership],
        "bundles": [list(r) for r in decision.bundles],
    }


def decision_from_dict(data: Mapping, config: MarketConfig) -> FirstStageDecision:
    """Parse a decision document; a full SolveResult document is accepted too.

    Rows and columns are matched by id, so the file may list VSPs and
    devices in any order.
    """
    if isinstance(data, Mapping) and "decision" in data:
        data = data["decision"]
    if not isinstance(data, Mapping):
        raise ValidationError("decision", "must be an object")
    try:
        vsp_ids = list(data.get("vsp_ids", config.vsp_ids))
        device_ids = list(data.get("device_ids", config.device_ids))
        membership = data["membership"]
        bundles = data["bundles"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("decision", f"missing field {exc}") from None
    if sorted(vsp_ids) != sorted(config.vsp_ids) or sorted(device_ids) != sorted(config.device_ids):
        raise ValidationError("decision", "VSP/device ids do not match the config")
    shape_ok = (len(membership) == len(vsp_ids) and len(bundles) == len(vsp_ids)
                and all(len(r) == len(device_ids) for r in membership)
                and all(len(r) == len(device_ids) for r in bundles))
    if not shape_ok:
        raise ValidationError("decision", "membership/bundles shape does not match the id lists")
    for row in bundles:
        for k in row:
            if isinstance(k, bool) or not isinstance(k, int):
                raise ValidationError("decision.bundles", f"bundle counts must be integers, got {k!r}")
    for row in membership:
        for m in row:
            if not isinstance(m, bool):
                raise ValidationError("decision.membership", f"membership must be true/false, got {m!r}")
    vi = [vsp_ids.index(v) for v in config.vsp_ids]
    di = [device_ids.index(d) for d in config.device_ids]
    return FirstStageDecision.from_lists(
        [[membership[v][e] for e in di] for v in vi],
        [[bundles[v][e] for e in di] for v in vi],
    )


def solve_result_to_dict(result: SolveResult, config: MarketConfig) -> dict:
    scenarios = []
    for s, sc in enumerate(result.scenarios):
        on_demand = result.recourse.scenario(s)
        scenarios.append({
            "probability": sc.probability,
            "demand": dict(zip(config.vsp_ids, sc.demand)),
            "cost": result.per_scenario_cost[s],
            "on_demand": [list(r) for r in on_demand],
        })
    return {
        "expected_cost": result.expected_cost,
        "first_stage_cost": result.first_stage_cost,
        "expected_recourse_cost": result.expected_recourse_cost,
        "decision": decision_to_dict(result.decision, config),
        "scenarios": scenarios,
        "expected_transmissions": result.expected_transmissions,
        "energy": result.energy.to_dict(),
    }


# --------------------------------------------------------------------------- comparison

CSV_HEADER = ("policy", "cost_first", "cost_recourse", "cost_total", "energy_j")


def comparison_to_dict(cmp: PolicyComparison) -> dict:
    return {
        "evaluation": cmp.evaluation,
        "seed": cmp.seed,
        "random_trials": cmp.random_trials,
        "vss": cmp.vss,
        "evf_planned_cost": cmp.evf_planned_cost,
        "policies": [
            {
                "policy": r.name,
                "cost_first": r.first_stage_cost,
                "cost_recourse": r.expected_recourse_cost,
                "cost_total": r.expected_total_cost,
                "energy_j": r.energy_joules,
            }
            for r in cmp.policies
        ],
    }


def comparison_to_csv(cmp: PolicyComparison) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in cmp.policies:
        writer.writerow([r.name] + [format_float(x) for x in (
            r.first_stage_cost, r.expected_recourse_cost, r.expected_total_cost, r.energy_joules)])
    return buf.getvalue()


# --------------------------------------------------------------------------- metrics

def metrics_report(
    config: MarketConfig,
    plan: SolveResult | None = None,
    facility_joules: float | None = None,
    it_joules: float | None = None,
) -> dict:
    """Energy figures for a market.

    ``transmissions`` compares one semantic transmission (objects of
    interest only) with one raw capture for every (VSP, device) pair.
    ``plan`` adds the expected energy per transmission of a solved plan.
    """
    devices = [
        {
            "id": d.id,
            "energy_efficiency_bits_per_joule": energy_efficiency(d),
            "raw_bits": d.raw_bits,
            "raw_joules": transmission_energy(d.raw_bits, d),
        }
        for d in config.devices
    ]
    pairs = []
    for v, vsp in enumerate(config.vsps):
        for e, dev in enumerate(config.devices):
            raw_j = transmission_energy(dev.raw_bits, dev)
            entry = {
                "vsp": vsp.id,
                "device": dev.id,
                "similarity": config.similarity[v][e],
                "eligible": config.eligible[v][e],
                "semantic_bits": config.semantic_bits[v][e],
                "semantic_joules": transmission_energy(config.semantic_bits[v][e], dev),
                "raw_bits": dev.raw_bits,
                "raw_joules": raw_j,
            }
            if entry["semantic_joules"] > 0:
                entry["raw_to_semantic_ratio"] = raw_j / entry["semantic_joules"]
            pairs.append(entry)
    report: dict = {"devices": devices, "transmissions": pairs}
    if plan is not None:
        section = {
            "expected_cost": plan.expected_cost,
            "expected_transmissions": plan.expected_transmissions,
            "energy_joules": plan.energy.total_joules,
        }
        if plan.expected_transmissions > 0:
            section["energy_per_transmission_joules"] = energy_per_transmission(
                plan.energy, plan.expected_transmissions)
        report["plan"] = section
    if facility_joules is not None or it_joules is not None:
        if facility_joules is None or it_joules is None:
            raise ValidationError("pue", "need both facility and IT energy")
        report["pue"] = pue(facility_joules, it_joules)
    return report
