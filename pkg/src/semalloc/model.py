"""Market domain types and JSON configuration ingestion.

A :class:`MarketConfig` is the single input of every solver. It is built
from a JSON document (see ``docs/formats.md``), validated, and frozen.
Validation also resolves everything derived from the raw inputs:

* device order (sorted by id, so "smallest id" tie-breaks follow index order),
* each VSP's interest embedding,
* the (VSP, device) eligibility matrix and per-pair semantic payload,
* on-demand prices derived from ``price_per_joule`` when not given,
* the default ``bundle_cap``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .energy import transmission_energy
from .errors import ConfigError, ValidationError
from .scenarios import (
    ScenarioSet,
    ScenarioSpec,
    load_scenarios,
    sample_scenarios,
    scenarios_from_list,
)
from .semantic import (
    DEFAULT_EMBEDDER,
    LabeledObject,
    cosine_similarity,
    embedder_from_dict,
    filter_semantic,
)

DEFAULT_THRESHOLD = 0.5
PRICE_TOL = 1e-12


@dataclass(frozen=True)
class OfferedLabel:
    label: str
    payload_bits: int


@dataclass(frozen=True)
class EdgeDevice:
    """A data seller.

    Prices are per planning period (membership), per bundle of
    ``bundle_size`` transmissions, and per single on-demand transmission.
    """

    id: str
    membership_cost: float
    bundle_cost: float
    bundle_size: int
    on_demand_cost: float
    transmit_power: float
    data_rate: float
    offered_labels: tuple[OfferedLabel, ...]
    price_per_joule: float | None = None

    @property
    def raw_bits(self) -> int:
        """Size of an unfiltered capture: every offered object."""
        return sum(o.payload_bits for o in self.offered_labels)

    @property
    def bundle_unit_cost(self) -> float:
        return self.bundle_cost / self.bundle_size

    def objects(self) -> list[LabeledObject]:
        return [LabeledObject(o.label, o.payload_bits, self.id) for o in self.offered_labels]


@dataclass(frozen=True)
class Vsp:
    id: str
    interest_label: str
    interest_embedding: tuple[float, ...]


@dataclass(frozen=True)
class MarketConfig:
    devices: tuple[EdgeDevice, ...]
    vsps: tuple[Vsp, ...]
    scenarios: ScenarioSet
    eligibility_threshold: float
    bundle_cap: int
    embedder: Any = DEFAULT_EMBEDDER
    scenario_spec: ScenarioSpec | None = None
    # derived during validation
    eligible: tuple[tuple[bool, ...], ...] = ()
    semantic_bits: tuple[tuple[int, ...], ...] = ()
    similarity: tuple[tuple[float, ...], ...] = field(default=(), compare=False)

    @property
    def n_vsps(self) -> int:
        return len(self.vsps)

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def vsp_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.vsps)

    @property
    def device_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.devices)

    def eligible_devices(self, v: int) -> list[int]:
        return [e for e in range(self.n_devices) if self.eligible[v][e]]

    def recourse_device(self, v: int) -> int | None:
        """Eligible device with the cheapest on-demand price; lowest index on ties."""
        best = None
        for e in self.eligible_devices(v):
            if best is None or self.devices[e].on_demand_cost < self.devices[best].on_demand_cost:
                best = e
        return best

    def unit_energy(self, v: int, e: int) -> float:
        """Joules for one semantic transmission from device ``e`` to VSP ``v``."""
        return transmission_energy(self.semantic_bits[v][e], self.devices[e])

    def with_scenarios(self, scenarios: ScenarioSet) -> "MarketConfig":
        """Same market, different scenario set (bundle_cap is kept)."""
        return replace(self, scenarios=scenarios.align(self.vsp_ids))


# --------------------------------------------------------------------------- validation helpers

def _require(data: Mapping, key: str, path: str):
    if key not in data:
        raise ValidationError(f"{path}.{key}" if path else key, "missing required field")
    return data[key]


def _number(value, path: str, *, minimum: float | None = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(path, f"must be a finite number, got {value!r}")
    if minimum is not None:
        if strict and not value > minimum:
            raise ValidationError(path, f"must be > {minimum}, got {value}")
        if not strict and value < minimum:
            raise ValidationError(path, f"must be >= {minimum}, got {value}")
    return float(value)


def _integer(value, path: str, *, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(path, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(path, f"must be >= {minimum}, got {value}")
    return value


def _identifier(value, path: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise ValidationError(path, "must be a non-empty string")
    return value


_DEVICE_KEYS = {"id", "membership_cost", "bundle_cost", "bundle_size", "on_demand_cost",
                "price_per_joule", "transmit_power", "data_rate", "offered_labels"}


def _parse_device(raw: Mapping, path: str) -> EdgeDevice:
    if not isinstance(raw, Mapping):
        raise ValidationError(path, "must be an object")
    unknown = set(raw) - _DEVICE_KEYS
    if unknown:
        raise ValidationError(path, f"unknown keys {sorted(unknown)}")
    dev_id = _identifier(_require(raw, "id", path), f"{path}.id")
    power = _number(_require(raw, "transmit_power", path), f"{path}.transmit_power", minimum=0, strict=True)
    rate = _number(_require(raw, "data_rate", path), f"{path}.data_rate", minimum=0, strict=True)
    labels_raw = _require(raw, "offered_labels", path)
    if not isinstance(labels_raw, list) or not labels_raw:
        raise ValidationError(f"{path}.offered_labels", "must be a non-empty list")
    labels = []
    for j, item in enumerate(labels_raw):
        lp = f"{path}.offered_labels[{j}]"
        if not isinstance(item, Mapping):
            raise ValidationError(lp, "must be an object with label and payload_bits")
        labels.append(OfferedLabel(
            _identifier(_require(item, "label", lp), f"{lp}.label"),
            _integer(_require(item, "payload_bits", lp), f"{lp}.payload_bits", minimum=1),
        ))
    bundle_size = _integer(_require(raw, "bundle_size", path), f"{path}.bundle_size", minimum=1)
    bundle_cost = _number(_require(raw, "bundle_cost", path), f"{path}.bundle_cost", minimum=0)
    membership = _number(_require(raw, "membership_cost", path), f"{path}.membership_cost", minimum=0)
    kappa = raw.get("price_per_joule")
    if kappa is not None:
        kappa = _number(kappa, f"{path}.price_per_joule", minimum=0)
    if "on_demand_cost" in raw:
        on_demand = _number(raw["on_demand_cost"], f"{path}.on_demand_cost", minimum=0)
    elif kappa is not None:
        mean_bits = sum(o.payload_bits for o in labels) / len(labels)
        on_demand = kappa * power * mean_bits / rate
    else:
        raise ValidationError(f"{path}.on_demand_cost", "give on_demand_cost or price_per_joule")
    if bundle_cost / bundle_size > on_demand + PRICE_TOL:
        raise ValidationError(
            f"{path}.on_demand_cost",
            f"on-demand price {on_demand} is below the bundle rate {bundle_cost / bundle_size} per transmission",
        )
    return EdgeDevice(dev_id, membership, bundle_cost, bundle_size, on_demand, power, rate,
                      tuple(labels), kappa)


def _resolve_scenarios(data: Mapping, vsp_ids: tuple[str, ...], base_dir: Path | None):
    spec = None
    if "scenario_spec" in data:
        spec = ScenarioSpec.from_dict(data["scenario_spec"])
        extra = [v for v in spec.vsp_ids if v not in vsp_ids]
        missing = [v for v in vsp_ids if v not in spec.vsp_ids]
        if extra or missing:
            raise ValidationError("scenario_spec.distributions",
                                  f"must cover exactly the VSPs (missing {missing}, unknown {extra})")
        spec = ScenarioSpec(tuple((v, dict(spec.distributions)[v]) for v in vsp_ids), spec.seed, spec.count)
    raw = data.get("scenarios")
    if raw is None:
        if spec is None:
            raise ValidationError("scenarios", "config needs 'scenarios' or 'scenario_spec'")
        return sample_scenarios(spec, spec.seed, spec.count), spec
    if isinstance(raw, Mapping):
        if set(raw) != {"csv"}:
            raise ValidationError("scenarios", "object form must be {\"csv\": path}")
        path = Path(raw["csv"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        ss = load_scenarios(path)
        return ss.align(vsp_ids), spec
    return scenarios_from_list(raw, vsp_ids), spec


def build_config(data: Mapping, base_dir: str | Path | None = None) -> MarketConfig:
    """Validate a decoded config document and return a :class:`MarketConfig`.

    Relative file references (scenario CSV, embedding table) resolve against
    ``base_dir``.

    Raises:
        ValidationError: naming the offending field.
    """
    if not isinstance(data, Mapping):
        raise ValidationError("", "config must be a JSON object")
    unknown = set(data) - {"devices", "vsps", "scenarios", "scenario_spec", "eligibility_threshold",
                           "bundle_cap", "embedder", "name", "description"}
    if unknown:
        raise ValidationError("", f"unknown top-level keys {sorted(unknown)}")
    base = Path(base_dir) if base_dir is not None else None

    raw_devices = _require(data, "devices", "")
    if not isinstance(raw_devices, list) or not raw_devices:
        raise ValidationError("devices", "must be a non-empty list")
    devices = [_parse_device(d, f"devices[{i}]") for i, d in enumerate(raw_devices)]
    ids = [d.id for d in devices]
    if len(set(ids)) != len(ids):
        raise ValidationError("devices", "duplicate device ids")
    devices.sort(key=lambda d: d.id)

    embedder = embedder_from_dict(data.get("embedder"), base)

    raw_vsps = _require(data, "vsps", "")
    if not isinstance(raw_vsps, list) or not raw_vsps:
        raise ValidationError("vsps", "must be a non-empty list")
    vsps = []
    for i, raw in enumerate(raw_vsps):
        path = f"vsps[{i}]"
        if not isinstance(raw, Mapping):
            raise ValidationError(path, "must be an object")
        unknown = set(raw) - {"id", "interest_label", "interest_embedding"}
        if unknown:
            raise ValidationError(path, f"unknown keys {sorted(unknown)}")
        vid = _identifier(_require(raw, "id", path), f"{path}.id")
        label = _identifier(_require(raw, "interest_label", path), f"{path}.interest_label")
        if "interest_embedding" in raw:
            vec = raw["interest_embedding"]
            if not isinstance(vec, list) or not vec:
                raise ValidationError(f"{path}.interest_embedding", "must be a non-empty list of numbers")
            vec = tuple(_number(x, f"{path}.interest_embedding") for x in vec)
        else:
            try:
                vec = tuple(float(x) for x in embedder(label))
            except ValidationError as exc:
                raise ValidationError(f"{path}.interest_label", exc.message) from None
        if not any(vec):
            raise ValidationError(f"{path}.interest_embedding", "must not be the zero vector")
        vsps.append(Vsp(vid, label, vec))
    vsp_ids = tuple(v.id for v in vsps)
    if len(set(vsp_ids)) != len(vsp_ids):
        raise ValidationError("vsps", "duplicate VSP ids")

    threshold = _number(data.get("eligibility_threshold", DEFAULT_THRESHOLD), "eligibility_threshold")
    if not -1.0 <= threshold <= 1.0:
        raise ValidationError("eligibility_threshold", f"must lie in [-1, 1], got {threshold}")

    eligible, bits, sims = [], [], []
    for i, vsp in enumerate(vsps):
        row_ok, row_bits, row_sim = [], [], []
        for dev in devices:
            try:
                kept = filter_semantic(dev.objects(), vsp.interest_embedding, threshold, embedder)
                best = max(cosine_similarity(embedder(o.label), vsp.interest_embedding)
                           for o in dev.offered_labels)
            except ValidationError as exc:
                raise ValidationError(f"vsps[{i}] x devices[{dev.id}]", exc.message) from None
            row_ok.append(best >= threshold)
            row_bits.append(sum(o.payload_bits for o, _ in kept))
            row_sim.append(best)
        if not any(row_ok):
            raise ValidationError(
                f"vsps[{i}]",
                f"VSP {vsp.id!r} (interest {vsp.interest_label!r}) has no eligible device at "
                f"threshold {threshold}; best similarity {max(row_sim):.4f}",
            )
        eligible.append(tuple(row_ok))
        bits.append(tuple(row_bits))
        sims.append(tuple(row_sim))

    scenarios, spec = _resolve_scenarios(data, vsp_ids, base)

    min_size = min(d.bundle_size for d in devices)
    default_cap = -(-scenarios.max_demand() // min_size)
    if data.get("bundle_cap") is None:
        cap = default_cap
    else:
        cap = _integer(data["bundle_cap"], "bundle_cap", minimum=0)

    return MarketConfig(
        devices=tuple(devices),
        vsps=tuple(vsps),
        scenarios=scenarios,
        eligibility_threshold=threshold,
        bundle_cap=cap,
        embedder=embedder,
        scenario_spec=spec,
        eligible=tuple(eligible),
        semantic_bits=tuple(bits),
        similarity=tuple(sims),
    )


def load_config(path: str | Path) -> MarketConfig:
    """Read, parse and validate a JSON market config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return build_config(data, base_dir=path.parent)


def emit_config(config: MarketConfig) -> dict:
    """Inverse of :func:`build_config`: a self-contained config document.

    Derived values (on-demand prices, embeddings, bundle cap, scenarios) are
    written out explicitly so the document reloads to an equal config.
    """
    devices = []
    for d in config.devices:
        entry = {
            "id": d.id,
            "membership_cost": d.membership_cost,
            "bundle_cost": d.bundle_cost,
            "bundle_size": d.bundle_size,
            "on_demand_cost": d.on_demand_cost,
            "transmit_power": d.transmit_power,
            "data_rate": d.data_rate,
            "offered_labels": [{"label": o.label, "payload_bits": o.payload_bits} for o in d.offered_labels],
        }
        if d.price_per_joule is not None:
            entry["price_per_joule"] = d.price_per_joule
        devices.append(entry)
    doc = {
        "devices": devices,
        "vsps": [{"id": v.id, "interest_label": v.interest_label,
                  "interest_embedding": list(v.interest_embedding)} for v in config.vsps],
        "scenarios": [
            {"probability": s.probability, "demand": dict(zip(config.vsp_ids, s.demand))}
            for s in config.scenarios
        ],
        "eligibility_threshold": config.eligibility_threshold,
        "bundle_cap": config.bundle_cap,
    }
    if hasattr(config.embedder, "to_dict"):
        doc["embedder"] = config.embedder.to_dict()
    if config.scenario_spec is not None:
        doc["scenario_spec"] = config.scenario_spec.to_dict()
    return doc


def dump_config(config: MarketConfig) -> str:
    return json.dumps(emit_config(config), indent=2)

