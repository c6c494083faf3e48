"""Exact inference: posterior marginals (bel), best-explanation beliefs (bel*), MPE.

All three queries run variable elimination over log-space factors; ``bel``
uses log-sum-exp to eliminate, ``bel*`` and MPE use max.  Findings are
per-state likelihood weights multiplied into the joint, so hard evidence is
just a one-hot weight vector.

``bel*`` follows the max-over-completions definition: for each state ``x``
of the query, the largest evidence-weighted joint over every other
variable, including variables that carry a likelihood finding.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .network import BeliefNetwork

TIE_TOLERANCE = 1e-9


class ContradictoryEvidence(ValueError):
    """The evidence leaves zero probability mass in the network."""


@dataclass(frozen=True, eq=False)
class LikelihoodFinding:
    variable: str
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w or any(x < 0 or not np.isfinite(x) for x in w):
            raise ValueError(f"finding on {self.variable!r} needs finite non-negative weights")
        if not any(x > 0 for x in w):
            raise ValueError(f"finding on {self.variable!r} has all-zero weights")
        object.__setattr__(self, "weights", w)

    @classmethod
    def hard(cls, variable, states: Sequence[str], state: str) -> "LikelihoodFinding":
        if state not in states:
            raise ValueError(f"{state!r} is not a state of {variable!r}")
        return cls(variable, tuple(1.0 if s == state else 0.0 for s in states))

    def __eq__(self, other):
        return (isinstance(other, LikelihoodFinding) and self.variable == other.variable
                and self.weights == other.weights)

    def __hash__(self):
        return hash((self.variable, self.weights))


class EvidenceSet(Mapping):
    """Immutable map of variable name to :class:`LikelihoodFinding`."""

    def __init__(self, findings=()):
        data = {}
        for f in findings:
            if f.variable in data:
                raise ValueError(f"duplicate finding for {f.variable!r}")
            data[f.variable] = f
        self._data = MappingProxyType(data)

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"EvidenceSet({list(self._data.values())!r})"


def apply_finding(evidence: EvidenceSet, finding: LikelihoodFinding) -> EvidenceSet:
    if finding.variable in evidence:
        raise ValueError(f"variable {finding.variable!r} already has a finding")
    return EvidenceSet([*evidence.values(), finding])


def as_evidence(net: BeliefNetwork, evidence=None) -> EvidenceSet:
    """Coerce ``None``, an :class:`EvidenceSet`, or ``{name: state | weights}``."""
    if evidence is None:
        return EvidenceSet()
    if isinstance(evidence, EvidenceSet):
        findings = list(evidence.values())
    else:
        stray = sorted(set(evidence) - set(net.names))
        if stray:
            raise ValueError(f"evidence on unknown variables {stray}")
        findings = []
        for name, value in evidence.items():
            if isinstance(value, LikelihoodFinding):
                findings.append(value)
            elif isinstance(value, str):
                findings.append(LikelihoodFinding.hard(name, net.var(name).states, value))
            else:
                findings.append(LikelihoodFinding(name, tuple(value)))
    for f in findings:
        if f.variable not in net:
            raise ValueError(f"evidence on unknown variable {f.variable!r}")
        var = net.var(f.variable)
        if len(f.weights) != var.card:
            raise ValueError(
                f"finding on {f.variable!r} has {len(f.weights)} weights, "
                f"variable has {var.card} states")
    return EvidenceSet(findings)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(a, dtype=float))


def _factors(net: BeliefNetwork, evidence: EvidenceSet):
    fs = []
    for v in net.variables:
        t = net.tables[v.name]
        scope = tuple(net.position(p) for p in t.parents) + (net.position(v.name),)
        fs.append((scope, _log(t.values)))
    for f in evidence.values():
        fs.append(((net.position(f.variable),), _log(f.weights)))
    return fs


def _combine(factors, cards):
    scope = tuple(sorted(set().union(*(s for s, _ in factors))))
    shape = tuple(cards[v] for v in scope)
    total = np.zeros(shape)
    for s, table in factors:
        order = sorted(range(len(s)), key=lambda i: s[i])
        aligned = np.transpose(table, order) if s else table
        bshape = [1] * len(scope)
        for v in s:
            bshape[scope.index(v)] = cards[v]
        total = total + np.reshape(aligned, bshape)
    return scope, total


def _eliminate(factors, cards, keep, mode):
    """Eliminate every variable not in ``keep``; return (scope, log-table)."""
    factors = list(factors)
    todo = set().union(*(s for s, _ in factors)) - set(keep)
    while todo:
        # greedy: smallest intermediate table first, ties by variable index
        best = None
        for v in todo:
            sc = set().union(*(s for s, _ in factors if v in s))
            size = np.prod([cards[u] for u in sc], dtype=float)
            if best is None or (size, v) < best[:2]:
                best = (size, v)
        v = best[1]
        rel = [f for f in factors if v in f[0]]
        factors = [f for f in factors if v not in f[0]]
        scope, table = _combine(rel, cards)
        ax = scope.index(v)
        with np.errstate(invalid="ignore", divide="ignore"):
            if mode == "sum":
                reduced = logsumexp(table, axis=ax)
            else:
                reduced = np.max(table, axis=ax)
        factors.append((scope[:ax] + scope[ax + 1:], reduced))
        todo.discard(v)
    scope, table = _combine(factors, cards)
    return scope, table


def _query_log(net, evidence, query, mode):
    ev = as_evidence(net, evidence)
    q = net.position(query)
    cards = [v.card for v in net.variables]
    factors = _factors(net, ev)
    factors.append(((q,), np.zeros(cards[q])))  # keeps the query in scope
    scope, table = _eliminate(factors, cards, {q}, mode)
    return np.asarray(table, dtype=float).reshape(cards[q])


def _normalize(log_values, query):
    top = np.max(log_values)
    if not np.isfinite(top):
        raise ContradictoryEvidence(
            f"evidence has zero probability; no distribution for {query!r}")
    p = np.exp(log_values - top)
    return p / p.sum()


def posterior_bel(net: BeliefNetwork, evidence=None, query: str = None) -> np.ndarray:
    """p(query | e), ordered like ``net.var(query).states``."""
    return _normalize(_query_log(net, evidence, query, "sum"), query)


def log_bel_star(net: BeliefNetwork, evidence=None, query: str = None) -> np.ndarray:
    """Unnormalized per-state maxima of the evidence-weighted joint, in log space."""
    return _query_log(net, evidence, query, "max")


def bel_star(net: BeliefNetwork, evidence=None, query: str = None,
             normalize: bool = True) -> np.ndarray:
    """max over completions of p(query=x, rest, e) for every state x.

    With ``normalize=False`` the raw maxima are returned (they can underflow
    for long products; :func:`log_bel_star` does not).
    """
    lv = log_bel_star(net, evidence, query)
    if not normalize:
        if not np.isfinite(np.max(lv)):
            raise ContradictoryEvidence(f"evidence has zero probability for {query!r}")
        return np.exp(lv)
    return _normalize(lv, query)


def mpe_assignment(net: BeliefNetwork, evidence=None) -> tuple[dict[str, str], float]:
    """Most probable complete assignment and its evidence-weighted joint value.

    Among equally probable assignments the lexicographically smallest one
    wins, comparing state indices in variable declaration order.
    """
    ev = as_evidence(net, evidence)
    cards = [v.card for v in net.variables]
    base = _factors(net, ev)
    fixed: list = []
    assignment: dict[str, str] = {}
    best_log = None
    for i, var in enumerate(net.variables):
        factors = base + fixed + [((i,), np.zeros(cards[i]))]
        _, table = _eliminate(factors, cards, {i}, "max")
        lm = np.asarray(table, dtype=float).reshape(cards[i])
        top = np.max(lm)
        if not np.isfinite(top):
            raise ContradictoryEvidence("evidence has zero probability; no MPE exists")
        if best_log is None:
            best_log = top
        k = int(np.flatnonzero(lm >= top - TIE_TOLERANCE)[0])
        assignment[var.name] = var.states[k]
        onehot = np.full(cards[i], -np.inf)
        onehot[k] = 0.0
        fixed.append(((i,), onehot))
    return assignment, float(np.exp(best_log))


def _state_index(var, value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        if not 0 <= value < var.card:
            raise IndexError(f"state index {value} out of range for {var.name!r}")
        return int(value)
    return var.index(value)


def joint_probability(net: BeliefNetwork, assignment: Mapping) -> float:
    """Product of the table entries selected by a complete assignment."""
    missing = [n for n in net.names if n not in assignment]
    if missing:
        raise ValueError(f"incomplete assignment; missing {missing}")
    idx = {n: _state_index(net.var(n), assignment[n]) for n in net.names}
    p = 1.0
    for v in net.variables:
        t = net.tables[v.name]
        p *= float(t.values[tuple(idx[q] for q in t.parents) + (idx[v.name],)])
    return p
