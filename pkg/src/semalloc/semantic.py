"""Label embeddings, cosine scoring and interest-based object filtering.

Object detection happens upstream: callers hand in already-labelled objects.
Labels and VSP interests are mapped to vectors by an *embedder*, any callable
``embedder(label) -> np.ndarray``. Two are provided:

- :class:`HashEmbedder` (default): signed feature hashing of character
  n-grams, L2-normalised. Reproducible, no model weights. Labels sharing
  many n-grams score high; unrelated labels score near zero. It makes no
  claim to capture meaning the way a trained language model would.
- :class:`LookupEmbedder`: a fixed label -> vector table, usually loaded from
  JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ValidationError

Embedder = Callable[[str], np.ndarray]

DEFAULT_DIM = 64


@dataclass(frozen=True)
class LabeledObject:
    """A segmented object captured by an edge device."""

    label: str
    payload_bits: int
    source_device: str = ""

    def __post_init__(self):
        if self.payload_bits <= 0:
            raise ValidationError("payload_bits", f"must be > 0, got {self.payload_bits}")


def _normalise_label(label: str) -> str:
    return " ".join(label.lower().split())


def _check_label(label: str) -> str:
    if not isinstance(label, str) or not label.strip():
        raise ValidationError("label", "must be a non-empty string")
    return label


@dataclass(frozen=True)
class HashEmbedder:
    """Feature-hashing embedder over character n-grams.

    The label is lower-cased, whitespace-collapsed and padded with ``^``/``$``
    before n-grams are taken. Every n-gram adds +1 or -1 to one coordinate,
    both picked from a BLAKE2b digest keyed by ``seed``.
    """

    dim: int = DEFAULT_DIM
    seed: int = 0
    ngram_min: int = 2
    ngram_max: int = 3

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("embedder.dim", "must be >= 1")
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise ValidationError("embedder.ngram_min", "need 1 <= ngram_min <= ngram_max")

    def _grams(self, text: str) -> list[str]:
        padded = f"^{text}$"
        grams = []
        for n in range(self.ngram_min, self.ngram_max + 1):
            grams.extend(padded[i:i + n] for i in range(len(padded) - n + 1))
        return grams or [padded]

    def _accumulate(self, grams: Iterable[str], salt: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for gram in grams:
            digest = hashlib.blake2b(
                f"{self.seed}{salt}\x1f{gram}".encode("utf-8"), digest_size=8
            ).digest()
            h = int.from_bytes(digest, "little")
            vec[h % self.dim] += 1.0 if (h >> 63) & 1 else -1.0
        return vec

    def __call__(self, label: str) -> np.ndarray:
        text = _normalise_label(_check_label(label))
        grams = self._grams(text)
        vec = self._accumulate(grams, "")
        salt = ""
        # sign collisions can cancel to zero; re-hash with a new salt until not
        while not vec.any():
            salt += "#"
            vec = self._accumulate(grams, salt)
        return vec / np.linalg.norm(vec)

    def to_dict(self) -> dict:
        return {"type": "hash", "dim": self.dim, "seed": self.seed,
                "ngram_min": self.ngram_min, "ngram_max": self.ngram_max}


@dataclass(frozen=True)
class LookupEmbedder:
    """Table-driven embedder. Vectors are returned as stored, not normalised."""

    table: tuple[tuple[str, tuple[float, ...]], ...]

    @classmethod
    def from_mapping(cls, table: Mapping[str, Sequence[float]]) -> "LookupEmbedder":
        if not table:
            raise ValidationError("embedder.table", "lookup table is empty")
        dims = set()
        items = []
        for label, values in table.items():
            vec = tuple(float(x) for x in values)
            if not all(math.isfinite(x) for x in vec):
                raise ValidationError(f"embedder.table.{label}", "non-finite entry")
            dims.add(len(vec))
            items.append((label, vec))
        if len(dims) != 1:
            raise ValidationError("embedder.table", f"vectors have mixed dimensions {sorted(dims)}")
        return cls(tuple(sorted(items)))

    @classmethod
    def from_file(cls, path: str | Path) -> "LookupEmbedder":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read embedding table {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("embedder.table", "expected a JSON object label -> vector")
        return cls.from_mapping(data)

    def __call__(self, label: str) -> np.ndarray:
        _check_label(label)
        for key, vec in self.table:
            if key == label:
                return np.array(vec, dtype=float)
        raise ValidationError("label", f"unknown label {label!r} for lookup embedder")

    def to_dict(self) -> dict:
        return {"type": "lookup", "table": {k: list(v) for k, v in self.table}}


DEFAULT_EMBEDDER = HashEmbedder()


def embed(label: str, embedder: Embedder | None = None) -> np.ndarray:
    """Embed ``label`` with ``embedder`` (the default hash embedder if None)."""
    return (embedder or DEFAULT_EMBEDDER)(label)


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between two nonzero vectors, clamped to [-1, 1].

    Raises:
        ValidationError: on a zero vector or mismatched dimensions.
    """
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("embedding", f"dimension mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValidationError("embedding", "cosine similarity of a zero vector is undefined")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def filter_semantic(
    objects: Iterable[LabeledObject],
    interest: Sequence[float],
    threshold: float,
    embedder: Embedder | None = None,
) -> list[tuple[LabeledObject, float]]:
    """Keep the objects whose label is at least ``threshold``-similar to ``interest``.

    Returns (object, score) pairs sorted by descending score, then label,
    then source device.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValidationError("threshold", f"must lie in [-1, 1], got {threshold}")
    cache: dict[str, float] = {}
    kept = []
    for obj in objects:
        if obj.label not in cache:
            cache[obj.label] = cosine_similarity(embed(obj.label, embedder), interest)
        score = cache[obj.label]
        if score >= threshold:
            kept.append((obj, score))
    kept.sort(key=lambda item: (-item[1], item[0].label, item[0].source_device))
    return kept


def best_match(labels: Iterable[str], interest: Sequence[float], embedder: Embedder | None = None) -> float:
    """Highest similarity between any of ``labels`` and ``interest`` (-inf if none)."""
    return max((cosine_similarity(embed(lb, embedder), interest) for lb in labels), default=-math.inf)


def embedder_from_dict(spec: Mapping | None, base_dir: Path | None = None) -> Embedder:
    """Build an embedder from its config-file representation."""
    if spec is None:
        return DEFAULT_EMBEDDER
    if not isinstance(spec, Mapping):
        raise ValidationError("embedder", "must be an object")
    kind = spec.get("type", "hash")
    if kind == "hash":
        unknown = set(spec) - {"type", "dim", "seed", "ngram_min", "ngram_max"}
        if unknown:
            raise ValidationError("embedder", f"unknown keys {sorted(unknown)}")
        return HashEmbedder(
            dim=int(spec.get("dim", DEFAULT_DIM)),
            seed=int(spec.get("seed", 0)),
            ngram_min=int(spec.get("ngram_min", 2)),
            ngram_max=int(spec.get("ngram_max", 3)),
        )
    if kind == "lookup":
        if "table" in spec:
            if not isinstance(spec["table"], Mapping):
                raise ValidationError("embedder.table", "must be an object label -> vector")
            return LookupEmbedder.from_mapping(spec["table"])
        if "path" in spec:
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return LookupEmbedder.from_file(path)
        raise ValidationError("embedder", "lookup embedder needs 'table' or 'path'")
    raise ValidationError("embedder.type", f"unknown embedder type {kind!r}")
