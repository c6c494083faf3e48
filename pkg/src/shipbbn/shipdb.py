"""Target database: records, JSON persistence, value-style mutation, simulation.

File layout::

    {
      "schema_version": 1,
      "targets": [
        {"id": "S1", "class": "FFG-7", "taxonomy_path": ["combatant", "frigate"],
         "portholes": [20, 40], "hatches": [60],
         "features": {"Bow": {"<25%": 1.0, ">=25%": 0.0}}}
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1


class DatabaseError(ValueError):
    """A database document or mutation violates the schema."""


def _freeze_features(features) -> Mapping[str, Mapping[str, float]]:
    return MappingProxyType({k: MappingProxyType({s: float(p) for s, p in v.items()})
                             for k, v in features.items()})


@dataclass(frozen=True)
class TargetRecord:
    id: str
    class_designation: str = ""
    taxonomy_path: tuple[str, ...] = ()
    portholes: tuple[float, ...] = ()
    hatches: tuple[float, ...] = ()
    features: Mapping[str, Mapping[str, float]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "taxonomy_path", tuple(self.taxonomy_path))
        object.__setattr__(self, "portholes", tuple(float(x) for x in self.portholes))
        object.__setattr__(self, "hatches", tuple(float(x) for x in self.hatches))
        object.__setattr__(self, "features", _freeze_features(self.features))
        where = f"target {self.id!r}"
        if not self.id:
            raise DatabaseError("target id must be non-empty")
        for name, locs in (("portholes", self.portholes), ("hatches", self.hatches)):
            if any(not 0 <= x <= 100 for x in locs):
                raise DatabaseError(f"{where}: {name} must lie in [0, 100]")
        if any(b <= a for a, b in zip(self.portholes, self.portholes[1:])):
            raise DatabaseError(f"{where}: portholes have non-increasing locations")
        for fname, dist in self.features.items():
            vals = list(dist.values())
            if not vals or any(v < 0 for v in vals) or abs(sum(vals) - 1) > 1e-9:
                raise DatabaseError(f"{where}: feature {fname!r} is not a normalized distribution")

    def __eq__(self, other):
        if not isinstance(other, TargetRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.class_designation,
            "taxonomy_path": list(self.taxonomy_path),
            "portholes": list(self.portholes),
            "hatches": list(self.hatches),
            "features": {k: dict(v) for k, v in sorted(self.features.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping, where: str = "record") -> "TargetRecord":
        if not isinstance(d, Mapping):
            raise DatabaseError(f"{where}: expected an object")
        if "id" not in d:
            raise DatabaseError(f"{where}.id: missing required field")
        unknown = set(d) - {"id", "class", "taxonomy_path", "portholes", "hatches", "features"}
        if unknown:
            raise DatabaseError(f"{where}: unknown fields {sorted(unknown)}")
        try:
            return cls(
                id=str(d["id"]),
                class_designation=str(d.get("class", "")),
                taxonomy_path=tuple(d.get("taxonomy_path", ())),
                portholes=tuple(d.get("portholes", ())),
                hatches=tuple(d.get("hatches", ())),
                features=dict(d.get("features", {})),
            )
        except DatabaseError as exc:
            raise DatabaseError(f"{where}: {exc}") from None
        except (TypeError, ValueError, AttributeError) as exc:
            raise DatabaseError(f"{where}: {exc}") from None


class ShipDatabase(Sequence):
    """Immutable ordered collection of :class:`TargetRecord` keyed by id."""

    def __init__(self, records: Iterable[TargetRecord] = ()):
        recs = tuple(records)
        seen = set()
        for r in recs:
            if r.id in seen:
                raise DatabaseError(f"duplicate target id {r.id!r}")
            seen.add(r.id)
        self._records = recs

    def __getitem__(self, i):
        return self._records[i]

    def __len__(self):
        return len(self._records)

    def __eq__(self, other):
        if isinstance(other, ShipDatabase):
            return self._records == other._records
        return NotImplemented

    def __repr__(self):
        return f"ShipDatabase({[r.id for r in self._records]})"

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self._records]

    def get(self, target_id: str) -> TargetRecord:
        for r in self._records:
            if r.id == target_id:
                return r
        raise KeyError(f"unknown target id {target_id!r}")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "targets": [r.to_dict() for r in self._records]}


def upsert_target(db: ShipDatabase, record: TargetRecord) -> ShipDatabase:
    recs = list(db)
    for i, r in enumerate(recs):
        if r.id == record.id:
            recs[i] = record
            return ShipDatabase(recs)
    return ShipDatabase(recs + [record])


def remove_target(db: ShipDatabase, target_id: str) -> ShipDatabase:
    if target_id not in db.ids:
        raise KeyError(f"cannot remove unknown target id {target_id!r}")
    return ShipDatabase(r for r in db if r.id != target_id)


def db_from_dict(doc) -> ShipDatabase:
    if not isinstance(doc, Mapping):
        raise DatabaseError("database document must be an object")
    if "schema_version" not in doc:
        raise DatabaseError("schema_version: missing required field")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise DatabaseError(f"schema_version: unsupported value {doc['schema_version']!r}")
    targets = doc.get("targets", [])
    if not isinstance(targets, list):
        raise DatabaseError("targets: expected a list")
    return ShipDatabase(TargetRecord.from_dict(t, f"targets[{i}]") for i, t in enumerate(targets))


def load_db(source) -> ShipDatabase:
    """Parse a database from a path, JSON text, or a parsed mapping.

    An empty file yields an empty database.
    """
    if isinstance(source, Mapping):
        return db_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")
                                    and source.strip()):
        text = Path(source).read_text()
    else:
        text = source
    if not text.strip():
        return ShipDatabase()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatabaseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return db_from_dict(doc)


def save_db(db: ShipDatabase, path=None) -> str:
    text = json.dumps(db.to_dict(), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


@dataclass(frozen=True)
class SimulationConfig:
    illumination: float = 0.7
    false_rate: float = 0.1
    grid: float = 10.0
    seed: int = 0
    overrides: Mapping[int, float] = field(default_factory=dict)  # porthole index (1-based) -> prob

    def __post_init__(self):
        for p in (self.illumination, self.false_rate, *self.overrides.values()):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.grid <= 0:
            raise ValueError("grid must be positive")


def _quantize(x: float, grid: float) -> float:
    return float(min(100.0, max(0.0, round(x / grid) * grid)))


def simulate_observations(target: TargetRecord, cfg: SimulationConfig,
                          rng: np.random.Generator | None = None) -> list[float]:
    """One night's sightings, sorted bow to stern and snapped to the grid.

    Each porthole is lit independently.  Each hatch shows up as a false
    detection with probability ``false_rate``; a hatchless target instead
    gets at most one false detection drawn uniformly over the grid.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    out = []
    for i, loc in enumerate(target.portholes, start=1):
        if rng.random() < cfg.overrides.get(i, cfg.illumination):
            out.append(_quantize(loc, cfg.grid))
    if target.hatches:
        for loc in target.hatches:
            if rng.random() < cfg.false_rate:
                out.append(_quantize(loc, cfg.grid))
    elif rng.random() < cfg.false_rate:
        cells = int(round(100 / cfg.grid))
        out.append(_quantize(rng.integers(0, cells + 1) * cfg.grid, cfg.grid))
    return sorted(out)
