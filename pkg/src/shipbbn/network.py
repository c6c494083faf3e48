"""Discrete Bayesian belief networks: variables, tables, validation, JSON I/O.

A :class:`BeliefNetwork` is immutable once built.  Conditional tables are
stored as numpy arrays of shape ``(*parent_cards, child_card)`` with the
write flag cleared, so a network can be shared freely between threads.

The serialized form is plain JSON::

    {
      "variables": [{"name": "Target", "states": ["T", "O"]}, ...],
      "edges": [["Target", "Bow"], ...],
      "tables": [{"child": "Bow", "parents": ["Target"], "rows": [[...], ...]}, ...]
    }

``rows`` lists one child distribution per joint parent configuration, in
row-major order over ``parents`` (the last parent varies fastest).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from math import prod
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

ROW_TOLERANCE = 1e-9


class NetworkError(ValueError):
    """A network definition violates a structural or numeric invariant."""


@dataclass(frozen=True)
class DiscreteVariable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if not self.states:
            raise NetworkError(f"variable {self.name!r} has no states")
        if len(set(self.states)) != len(self.states):
            raise NetworkError(f"variable {self.name!r} has duplicate state labels")

    @property
    def card(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise KeyError(f"{state!r} is not a state of {self.name!r}") from None


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    child: str
    parents: tuple[str, ...]
    values: np.ndarray  # shape (*parent_cards, child_card)

    def rows(self) -> list[list[float]]:
        card = self.values.shape[-1]
        return self.values.reshape(-1, card).tolist()


@dataclass(frozen=True, eq=False)
class BeliefNetwork:
    """Validated, immutable DAG of discrete variables with their tables.

    Variables keep their declaration order; that order drives MPE
    tie-breaking and the serialized layout.
    """

    variables: tuple[DiscreteVariable, ...]
    edges: tuple[tuple[str, str], ...]
    tables: Mapping[str, ConditionalTable]
    _index: Mapping[str, int] = field(repr=False)

    def __len__(self):
        return len(self.variables)

    def __contains__(self, name):
        return name in self._index

    def var(self, name: str) -> DiscreteVariable:
        try:
            return self.variables[self._index[name]]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def position(self, name: str) -> int:
        return self._index[name]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def parents(self, name: str) -> tuple[str, ...]:
        return self.tables[name].parents

    def children(self, name: str) -> list[str]:
        return [c for p, c in self.edges if p == name]

    def table(self, name: str) -> np.ndarray:
        return self.tables[name].values

    def to_dict(self) -> dict:
        return {
            "variables": [{"name": v.name, "states": list(v.states)} for v in self.variables],
            "edges": [list(e) for e in self.edges],
            "tables": [
                {"child": v.name, "parents": list(self.tables[v.name].parents),
                 "rows": self.tables[v.name].rows()}
                for v in self.variables
            ],
        }

    def structural_hash(self) -> str:
        """SHA-256 over the canonical serialized form (structure and numbers)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_table(self, child: str, rows) -> "BeliefNetwork":
        """Return a copy with ``child``'s table rows replaced (same parents)."""
        spec = self.to_dict()
        for t in spec["tables"]:
            if t["child"] == child:
                t["rows"] = [list(map(float, r)) for r in rows]
                break
        else:
            raise KeyError(f"unknown variable {child!r}")
        return network_from_dict(spec)


def _topological_order(names: Sequence[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    indeg = {n: 0 for n in names}
    out: dict[str, list[str]] = {n: [] for n in names}
    for p, c in edges:
        out[p].append(c)
        indeg[c] += 1
    ready = [n for n in names if indeg[n] == 0]
    order = []
    while ready:
        n = ready.pop()
        order.append(n)
        for c in out[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(names):
        stuck = sorted(n for n in names if indeg[n] > 0)
        raise NetworkError(f"cycle detected among variables {stuck}")
    return order


def build_network(variables, edges, tables) -> BeliefNetwork:
    """Validate and freeze a network.

    ``variables`` is a sequence of :class:`DiscreteVariable` or
    ``(name, states)`` pairs.  ``tables`` maps each child name to either an
    array of shape ``(*parent_cards, child_card)`` or a ``(parents, rows)``
    pair; with an array, the parent order is taken from ``edges``.
    """
    vs = []
    for v in variables:
        vs.append(v if isinstance(v, DiscreteVariable) else DiscreteVariable(v[0], tuple(v[1])))
    index: dict[str, int] = {}
    for i, v in enumerate(vs):
        if v.name in index:
            raise NetworkError(f"duplicate variable name {v.name!r}")
        index[v.name] = i

    edge_list = []
    seen_edges = set()
    for p, c in edges:
        for n in (p, c):
            if n not in index:
                raise NetworkError(f"edge ({p!r}, {c!r}) references undeclared variable {n!r}")
        if (p, c) in seen_edges:
            raise NetworkError(f"duplicate edge ({p!r}, {c!r})")
        seen_edges.add((p, c))
        edge_list.append((p, c))
    _topological_order(list(index), edge_list)

    incoming: dict[str, list[str]] = {v.name: [] for v in vs}
    for p, c in edge_list:
        incoming[c].append(p)

    if isinstance(tables, Mapping):
        items = list(tables.items())
    else:
        items = [(t[0], t[1]) for t in tables]
    frozen: dict[str, ConditionalTable] = {}
    for child, spec in items:
        if child not in index:
            raise NetworkError(f"table for undeclared variable {child!r}")
        if child in frozen:
            raise NetworkError(f"variable {child!r} has more than one table")
        if (isinstance(spec, tuple) and len(spec) == 2 and isinstance(spec[0], (tuple, list))
                and all(isinstance(p, str) for p in spec[0])):
            parents, rows = tuple(spec[0]), spec[1]
        else:
            parents, rows = tuple(incoming[child]), spec
        if sorted(parents) != sorted(incoming[child]):
            raise NetworkError(
                f"table for {child!r} lists parents {list(parents)} but incoming edges are "
                f"{incoming[child]}")
        for p in parents:
            if p not in index:
                raise NetworkError(f"table for {child!r} references undeclared parent {p!r}")
        card = vs[index[child]].card
        pcards = tuple(vs[index[p]].card for p in parents)
        arr = np.array(rows, dtype=float)
        if arr.size != prod(pcards) * card:
            raise NetworkError(
                f"table for {child!r} has {arr.size} entries, expected "
                f"{prod(pcards)} rows x {card} states")
        arr = arr.reshape(pcards + (card,))
        flat = arr.reshape(-1, card)
        if not np.all(np.isfinite(flat)) or np.any(flat < 0):
            raise NetworkError(f"table for {child!r} has negative or non-finite entries")
        sums = flat.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOLERANCE)
        if bad.size:
            raise NetworkError(
                f"table for {child!r}: row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        arr.setflags(write=False)
        frozen[child] = ConditionalTable(child, parents, arr)

    missing = [v.name for v in vs if v.name not in frozen]
    if missing:
        raise NetworkError(f"no table for variables {missing}")

    return BeliefNetwork(tuple(vs), tuple(edge_list), dict(frozen), dict(index))


def network_from_dict(data: Mapping) -> BeliefNetwork:
    try:
        variables = [(v["name"], v["states"]) for v in data["variables"]]
        edges = [tuple(e) for e in data["edges"]]
        tables = [(t["child"], (tuple(t["parents"]), t["rows"])) for t in data["tables"]]
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed network document: missing or bad field {exc}") from None
    return build_network(variables, edges, tables)


def load_network(source) -> BeliefNetwork:
    """Load from a path, a JSON string or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return network_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text()
    else:
        text = source
    return network_from_dict(json.loads(text))


def save_network(net: BeliefNetwork, path=None) -> str:
    text = json.dumps(net.to_dict(), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
