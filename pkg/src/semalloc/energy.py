"""Transmission energy model and efficiency metrics.

Radio energy uses the linear power-rate model::

    E [J] = transmit_power [W] * payload_bits / data_rate [bit/s]

Only transmission is counted; idle and receive energy are ignored.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .errors import ValidationError


class Radio(Protocol):
    transmit_power: float
    data_rate: float


def transmission_energy(payload_bits: float, device: Radio) -> float:
    """Joules spent by ``device`` to send ``payload_bits``."""
    if payload_bits < 0:
        raise ValidationError("payload_bits", f"must be >= 0, got {payload_bits}")
    if device.data_rate <= 0:
        raise ValidationError("data_rate", "must be > 0")
    return device.transmit_power * payload_bits / device.data_rate


def energy_efficiency(device: Radio) -> float:
    """Bits delivered per joule (data rate over transmit power)."""
    if device.transmit_power <= 0:
        raise ValidationError("transmit_power", "must be > 0")
    return device.data_rate / device.transmit_power


def pue(total_facility_joules: float, it_joules: float) -> float:
    """Power usage effectiveness: total facility energy over IT equipment energy."""
    if it_joules <= 0:
        raise ValidationError("it_joules", "must be > 0")
    if total_facility_joules < it_joules:
        raise ValidationError(
            "total_facility_joules",
            f"facility energy {total_facility_joules} is below IT energy {it_joules}",
        )
    return total_facility_joules / it_joules


@dataclass(frozen=True)
class EnergyLedger:
    """Joules attributed to each device and each VSP.

    ``total_joules`` always equals the sum over devices; the per-VSP view is
    the same energy split by buyer.
    """

    per_device_joules: Mapping[str, float] = field(default_factory=dict)
    per_vsp_joules: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for where, entries in (("per_device_joules", self.per_device_joules),
                               ("per_vsp_joules", self.per_vsp_joules)):
            for key, joules in entries.items():
                if joules < 0 or not math.isfinite(joules):
                    raise ValidationError(f"{where}.{key}", f"invalid energy {joules}")

    @property
    def total_joules(self) -> float:
        return math.fsum(self.per_device_joules.values())

    def to_dict(self) -> dict:
        return {
            "per_device_joules": dict(self.per_device_joules),
            "per_vsp_joules": dict(self.per_vsp_joules),
            "total_joules": self.total_joules,
        }


class LedgerBuilder:
    """Accumulates (device, vsp, joules) entries and emits an :class:`EnergyLedger`.

    Sums use ``math.fsum`` so the result does not depend on insertion order.
    """

    def __init__(self, device_ids: Sequence[str], vsp_ids: Sequence[str]):
        self._device_ids = list(device_ids)
        self._vsp_ids = list(vsp_ids)
        self._by_device: dict[str, list[float]] = defaultdict(list)
        self._by_vsp: dict[str, list[float]] = defaultdict(list)

    def add(self, device_id: str, vsp_id: str, joules: float) -> None:
        if joules:
            self._by_device[device_id].append(joules)
            self._by_vsp[vsp_id].append(joules)

    def merge(self, other: "LedgerBuilder", weight: float = 1.0) -> None:
        for key, values in other._by_device.items():
            self._by_device[key].extend(weight * x for x in values)
        for key, values in other._by_vsp.items():
            self._by_vsp[key].extend(weight * x for x in values)

    def build(self) -> EnergyLedger:
        return EnergyLedger(
            per_device_joules={d: math.fsum(self._by_device.get(d, ())) for d in self._device_ids},
            per_vsp_joules={v: math.fsum(self._by_vsp.get(v, ())) for v in self._vsp_ids},
        )


def energy_per_transmission(ledger: EnergyLedger, transmission_count: float) -> float:
    """Average joules per transmission over the ledger."""
    if transmission_count <= 0:
        raise ValidationError("transmission_count", "must be positive")
    return ledger.total_joules / transmission_count
