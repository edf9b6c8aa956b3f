"""Random small market instances for solver cross-checks."""

import numpy as np

from semalloc.model import build_config

LABELS = ("l0", "l1", "l2")


def random_instance_dict(rng: np.random.Generator, *, max_devices=3, max_vsps=2, max_scenarios=8,
                         max_demand=60, max_cap=8) -> dict:
    """Config document with one-hot label embeddings so eligibility is exact.

    Costs sit on coarse grids (multiples of 0.5 / 0.25) so exact ties between
    decisions are common and the tie-break gets exercised.
    """
    n_dev = int(rng.integers(1, max_devices + 1))
    n_vsp = int(rng.integers(1, max_vsps + 1))
    n_sc = int(rng.integers(1, max_scenarios + 1))
    interests = [LABELS[int(rng.integers(len(LABELS)))] for _ in range(n_vsp)]
    while True:
        offered = []
        for _ in range(n_dev):
            k = int(rng.integers(1, len(LABELS) + 1))
            offered.append(sorted(rng.choice(LABELS, size=k, replace=False).tolist()))
        if all(any(lab in labs for labs in offered) for lab in interests):
            break
    devices = []
    for e in range(n_dev):
        size = int(rng.integers(1, 13))
        bundle_cost = float(rng.integers(0, 4 * size + 1)) * 0.25
        unit = bundle_cost / size
        on_demand = float(np.ceil(unit * 4) / 4) + float(rng.integers(0, 9)) * 0.25
        devices.append({
            "id": f"d{e}",
            "membership_cost": float(rng.integers(0, 21)) * 0.5,
            "bundle_cost": bundle_cost,
            "bundle_size": size,
            "on_demand_cost": on_demand,
            "transmit_power": float(rng.integers(1, 11)) / 10,
            "data_rate": float(rng.integers(1, 21)) * 1e6,
            "offered_labels": [{"label": lab, "payload_bits": int(rng.integers(1000, 2_000_000))}
                               for lab in offered[e]],
        })
    weights = rng.integers(1, 10, size=n_sc).astype(float)
    probs = weights / weights.sum()
    scenarios = [
        {"probability": float(p), "demand": {f"v{v}": int(rng.integers(0, max_demand + 1)) for v in range(n_vsp)}}
        for p in probs
    ]
    return {
        "devices": devices,
        "vsps": [{"id": f"v{v}", "interest_label": interests[v]} for v in range(n_vsp)],
        "scenarios": scenarios,
        "eligibility_threshold": 0.5,
        "bundle_cap": int(rng.integers(0, max_cap + 1)),
        "embedder": {"type": "lookup",
                     "table": {lab: [1.0 if i == j else 0.0 for j in range(len(LABELS))]
                               for i, lab in enumerate(LABELS)}},
    }


def random_instances(seed: int, count: int, **kwargs):
    rng = np.random.default_rng(seed)
    return [build_config(random_instance_dict(rng, **kwargs)) for _ in range(count)]
