"""Demand scenarios: validation, seeded sampling and CSV input/output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ValidationError

PROBABILITY_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    probability: float
    demand: tuple[int, ...]


@dataclass(frozen=True)
class ScenarioSet:
    """Probability-weighted demand realisations, one demand per VSP.

    ``demand[i]`` of every scenario belongs to ``vsp_ids[i]``.
    """

    vsp_ids: tuple[str, ...]
    scenarios: tuple[Scenario, ...]
    source: str = field(default="inline", compare=False)

    def __post_init__(self):
        validate_scenarios(self)

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    def demand_matrix(self) -> np.ndarray:
        """Integer array of shape (n_vsps, n_scenarios)."""
        return np.array([s.demand for s in self.scenarios], dtype=np.int64).reshape(
            len(self.scenarios), len(self.vsp_ids)).T

    def max_demand(self) -> int:
        return max((max(s.demand, default=0) for s in self.scenarios), default=0)

    def mean_demand(self) -> tuple[float, ...]:
        return tuple(
            math.fsum(s.probability * s.demand[i] for s in self.scenarios)
            for i in range(len(self.vsp_ids))
        )

    def align(self, vsp_ids: Sequence[str]) -> "ScenarioSet":
        """Reorder demand columns to ``vsp_ids``; every id must be present."""
        vsp_ids = tuple(vsp_ids)
        if vsp_ids == self.vsp_ids:
            return self
        missing = [v for v in vsp_ids if v not in self.vsp_ids]
        if missing:
            raise ValidationError("scenarios", f"no demand given for VSP(s) {missing}")
        extra = [v for v in self.vsp_ids if v not in vsp_ids]
        if extra:
            raise ValidationError("scenarios", f"demand given for unknown VSP(s) {extra}")
        index = [self.vsp_ids.index(v) for v in vsp_ids]
        return ScenarioSet(
            vsp_ids,
            tuple(Scenario(s.probability, tuple(s.demand[i] for i in index)) for s in self.scenarios),
            self.source,
        )


def validate_scenarios(ss: ScenarioSet) -> None:
    if not ss.vsp_ids:
        raise ValidationError("scenarios", "no VSP columns")
    if len(set(ss.vsp_ids)) != len(ss.vsp_ids):
        raise ValidationError("scenarios", "duplicate VSP ids")
    if not ss.scenarios:
        raise ValidationError("scenarios", "at least one scenario is required")
    for i, s in enumerate(ss.scenarios):
        if not (0.0 < s.probability <= 1.0):
            raise ValidationError(f"scenarios[{i}].probability", f"must lie in (0, 1], got {s.probability}")
        if len(s.demand) != len(ss.vsp_ids):
            raise ValidationError(f"scenarios[{i}].demand",
                                  f"expected {len(ss.vsp_ids)} demands, got {len(s.demand)}")
        for d in s.demand:
            if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 0:
                raise ValidationError(f"scenarios[{i}].demand", f"demand must be a nonnegative integer, got {d!r}")
    total = math.fsum(s.probability for s in ss.scenarios)
    if abs(total - 1.0) > PROBABILITY_TOL:
        raise ValidationError("scenarios", f"probabilities sum to {total!r}, expected 1")


# --------------------------------------------------------------------------- sampling

_DISTRIBUTION_KEYS = {
    "uniform": ("lo", "hi"),
    "poisson": ("lam",),
    "two-point": ("d1", "p", "d2"),
}


@dataclass(frozen=True)
class Distribution:
    """Per-VSP demand law.

    kinds: ``uniform`` (integers lo..hi inclusive), ``poisson`` (rate lam),
    ``two-point`` (d1 with probability p, else d2; ``stratified`` draws the
    two values in exact proportion using systematic sampling).
    """

    kind: str
    params: tuple[float, ...]
    stratified: bool = False

    def __post_init__(self):
        if self.kind not in _DISTRIBUTION_KEYS:
            raise ValidationError("distribution.type", f"unknown distribution {self.kind!r}")
        names = _DISTRIBUTION_KEYS[self.kind]
        if len(self.params) != len(names):
            raise ValidationError("distribution", f"{self.kind} takes {names}")
        if any(not math.isfinite(x) for x in self.params):
            raise ValidationError("distribution", "parameters must be finite")
        if self.kind == "uniform":
            lo, hi = self.params
            if lo != int(lo) or hi != int(hi) or lo < 0 or hi < lo:
                raise ValidationError("distribution", f"uniform needs integers 0 <= lo <= hi, got {lo}, {hi}")
        elif self.kind == "poisson":
            if self.params[0] < 0:
                raise ValidationError("distribution.lam", "must be >= 0")
        else:
            d1, p, d2 = self.params
            if d1 != int(d1) or d2 != int(d2) or d1 < 0 or d2 < 0:
                raise ValidationError("distribution", "two-point values must be nonnegative integers")
            if not 0.0 <= p <= 1.0:
                raise ValidationError("distribution.p", f"must lie in [0, 1], got {p}")
        if self.stratified and self.kind != "two-point":
            raise ValidationError("distribution.stratified", "only supported for two-point")

    def mean(self) -> float:
        if self.kind == "uniform":
            return (self.params[0] + self.params[1]) / 2
        if self.kind == "poisson":
            return self.params[0]
        d1, p, d2 = self.params
        return p * d1 + (1 - p) * d2

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "uniform":
            lo, hi = (int(x) for x in self.params)
            return rng.integers(lo, hi + 1, size=count)
        if self.kind == "poisson":
            return rng.poisson(self.params[0], size=count)
        d1, p, d2 = self.params
        if self.stratified:
            offset = rng.random()
            first = (np.arange(count) + offset) / count < p
            out = np.where(first, int(d1), int(d2))
            return out if count == 1 else rng.permutation(out)
        return np.where(rng.random(count) < p, int(d1), int(d2))

    @classmethod
    def from_dict(cls, data: Mapping, path: str = "distribution") -> "Distribution":
        if not isinstance(data, Mapping) or "type" not in data:
            raise ValidationError(path, "expected an object with a 'type' key")
        kind = data["type"]
        names = _DISTRIBUTION_KEYS.get(kind)
        if names is None:
            raise ValidationError(f"{path}.type", f"unknown distribution {kind!r}")
        unknown = set(data) - {"type", "stratified", *names}
        if unknown:
            raise ValidationError(path, f"unknown keys {sorted(unknown)}")
        try:
            params = tuple(float(data[k]) for k in names)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(path, f"{kind} requires numeric {names}") from exc
        try:
            return cls(kind, params, bool(data.get("stratified", False)))
        except ValidationError as exc:
            raise ValidationError(path, exc.message) from None

    def to_dict(self) -> dict:
        out: dict = {"type": self.kind}
        for name, value in zip(_DISTRIBUTION_KEYS[self.kind], self.params):
            out[name] = int(value) if name in ("lo", "hi", "d1", "d2") else value
        if self.stratified:
            out["stratified"] = True
        return out


@dataclass(frozen=True)
class ScenarioSpec:
    """Sampling recipe: one :class:`Distribution` per VSP plus seed and count."""

    distributions: tuple[tuple[str, Distribution], ...]
    seed: int = 0
    count: int = 100

    @property
    def vsp_ids(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.distributions)

    @classmethod
    def from_dict(cls, data: Mapping, path: str = "scenario_spec") -> "ScenarioSpec":
        if not isinstance(data, Mapping):
            raise ValidationError(path, "must be an object")
        dists = data.get("distributions")
        if not isinstance(dists, Mapping) or not dists:
            raise ValidationError(f"{path}.distributions", "must map VSP id -> distribution")
        seed = data.get("seed", 0)
        count = data.get("count", 100)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ValidationError(f"{path}.seed", "must be an integer")
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ValidationError(f"{path}.count", "must be a positive integer")
        return cls(
            tuple((v, Distribution.from_dict(d, f"{path}.distributions.{v}")) for v, d in dists.items()),
            seed,
            count,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "distributions": {v: d.to_dict() for v, d in self.distributions},
        }


def sample_scenarios(spec: ScenarioSpec | Mapping[str, Distribution], seed: int, count: int) -> ScenarioSet:
    """Draw ``count`` equiprobable scenarios.

    The result is a pure function of (distributions, seed, count): VSPs are
    sampled in declaration order from a single ``numpy`` PCG64 stream.
    """
    if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 1:
        raise ValidationError("count", f"must be a positive integer, got {count!r}")
    items = spec.distributions if isinstance(spec, ScenarioSpec) else tuple(spec.items())
    if not items:
        raise ValidationError("distributions", "at least one VSP distribution is required")
    rng = np.random.default_rng(seed)
    columns = [dist.draw(rng, count) for _, dist in items]
    p = 1.0 / count
    scenarios = tuple(
        Scenario(p, tuple(int(col[i]) for col in columns)) for i in range(count)
    )
    return ScenarioSet(tuple(v for v, _ in items), scenarios, source=f"sampled(seed={seed})")


# --------------------------------------------------------------------------- CSV

def parse_scenarios_csv(text: str, source: str = "csv") -> ScenarioSet:
    """Parse scenario CSV text: header of VSP ids, optional ``probability`` column."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError(source, "empty scenario file")
    header = [h.strip() for h in rows[0]]
    has_prob = "probability" in header
    if has_prob and header[-1] != "probability":
        raise ValidationError(f"{source}:1", "probability must be the last column")
    vsp_ids = tuple(header[:-1] if has_prob else header)
    if not vsp_ids or any(not v for v in vsp_ids):
        raise ValidationError(f"{source}:1", "header must name every VSP column")
    body = rows[1:]
    if not body:
        raise ValidationError(source, "no scenario rows")
    demands, probs = [], []
    for lineno, row in enumerate(body, start=2):
        where = f"{source}:{lineno}"
        if len(row) != len(header):
            raise ValidationError(where, f"expected {len(header)} fields, got {len(row)}")
        try:
            values = [int(cell.strip()) for cell in row[:len(vsp_ids)]]
        except ValueError:
            raise ValidationError(where, "demands must be integers") from None
        neg = [v for v in values if v < 0]
        if neg:
            raise ValidationError(where, f"negative demand {neg[0]} in row {lineno - 1}")
        demands.append(tuple(values))
        if has_prob:
            try:
                probs.append(float(row[-1]))
            except ValueError:
                raise ValidationError(where, "probability is not a number") from None
    if not has_prob:
        probs = [1.0 / len(demands)] * len(demands)
    return ScenarioSet(vsp_ids, tuple(Scenario(p, d) for p, d in zip(probs, demands)), source=source)


def load_scenarios(path: str | Path) -> ScenarioSet:
    """Read a scenario CSV from disk (historical demand data)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenarios_csv(text, source=f"historical({Path(path).name})")


def scenarios_to_csv(ss: ScenarioSet, with_probability: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(ss.vsp_ids) + (["probability"] if with_probability else []))
    for s in ss.scenarios:
        row = [str(d) for d in s.demand]
        if with_probability:
            row.append(f"{s.probability:.9f}")
        writer.writerow(row)
    return buf.getvalue()


def scenarios_from_list(items: Sequence, vsp_ids: Sequence[str], path: str = "scenarios") -> ScenarioSet:
    """Build a ScenarioSet from the inline config form.

    Each item is ``{"probability": p, "demand": {vsp_id: d}}``; a missing
    probability everywhere means equiprobable.
    """
    if not isinstance(items, Sequence) or isinstance(items, (str, bytes)) or not items:
        raise ValidationError(path, "must be a non-empty list")
    given = [isinstance(it, Mapping) and "probability" in it for it in items]
    if any(given) and not all(given):
        raise ValidationError(path, "either every scenario has a probability or none does")
    out = []
    for i, item in enumerate(items):
        where = f"{path}[{i}]"
        if not isinstance(item, Mapping) or not isinstance(item.get("demand"), Mapping):
            raise ValidationError(f"{where}.demand", "must map VSP id -> demand")
        demand = item["demand"]
        missing = [v for v in vsp_ids if v not in demand]
        if missing:
            raise ValidationError(f"{where}.demand", f"missing demand for VSP(s) {missing}")
        extra = [v for v in demand if v not in vsp_ids]
        if extra:
            raise ValidationError(f"{where}.demand", f"unknown VSP(s) {extra}")
        values = tuple(demand[v] for v in vsp_ids)
        for v, d in zip(vsp_ids, values):
            if isinstance(d, bool) or not isinstance(d, int) or d < 0:
                raise ValidationError(f"{where}.demand.{v}", f"must be a nonnegative integer, got {d!r}")
        p = item["probability"] if all(given) else 1.0 / len(items)
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ValidationError(f"{where}.probability", "must be a number")
        out.append(Scenario(float(p), values))
    try:
        return ScenarioSet(tuple(vsp_ids), tuple(out), source="inline")
    except ValidationError as exc:
        raise ValidationError(path + exc.path[len("scenarios"):], exc.message) from None
