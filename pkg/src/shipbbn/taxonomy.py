"""Coarse-to-fine classification over a taxonomy of small classifiers.

Each internal :class:`TaxonomyNode` carries a classifier that separates its
children (a :class:`NetworkClassifier`) or, at the bottom, ranks database
targets with {T | O} modules (a :class:`TargetClassifier`).  Descent stops
as soon as a level is inconclusive and the deepest conclusive label is
returned together with the trace.

Taxonomy files are JSON::

    {"schema_version": 1,
     "root": {"label": "contact",
              "thresholds": {"absolute": 0.6, "ratio": 2.0},
              "classifier": {"type": "network", "hypothesis": "Category",
                             "network": {...} | "network_file": "cat.json"},
              "children": [{"label": "frigate",
                            "classifier": {"type": "targets",
                                           "features": [{"name": "Bow", "states": [...]}],
                                           "portholes": {"slots": 3, "false_budget": 1}}}]}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .inference import posterior_bel
from .network import BeliefNetwork, load_network
from .obsnet import ObservationModel
from .toengine import PortholeFeature, TOModule, build_to_module, rank_targets

SCHEMA_VERSION = 1


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    absolute: float = 0.6
    ratio: float = 2.0


@dataclass(frozen=True, eq=False)
class NetworkClassifier:
    network: BeliefNetwork
    hypothesis: str

    @property
    def hypotheses(self) -> tuple[str, ...]:
        return self.network.var(self.hypothesis).states

    @property
    def features(self) -> set[str]:
        return set(self.network.names) - {self.hypothesis}

    def beliefs(self, evidence: Mapping, db=None) -> dict[str, float]:
        ev = {k: v for k, v in evidence.items() if k in self.features}
        p = posterior_bel(self.network, ev, self.hypothesis)
        return dict(zip(self.hypotheses, map(float, p)))


@dataclass(frozen=True, eq=False)
class TargetClassifier:
    module: TOModule
    target_ids: tuple[str, ...] | None = None
    priors: Mapping[str, float] = field(default_factory=dict)
    path: tuple[str, ...] = ()

    @property
    def features(self) -> set[str]:
        return set(self.module.feature_names)

    def targets(self, db) -> list:
        if self.target_ids is not None:
            return [db.get(i) for i in self.target_ids]
        return [t for t in db if tuple(t.taxonomy_path[:len(self.path)]) == self.path]

    def ranking(self, evidence: Mapping, db):
        ev = {k: v for k, v in evidence.items() if k in self.features}
        return rank_targets(self.targets(db), self.module, ev, priors=dict(self.priors))

    def beliefs(self, evidence: Mapping, db=None) -> dict[str, float]:
        """Ratios renormalised over the candidate targets."""
        ranking = self.ranking(evidence, db)
        logs = np.array([r.log_ratio for r in ranking.results])
        if np.all(logs == -np.inf):
            return {r.target_id: 0.0 for r in ranking.results}
        w = np.exp(logs - logs.max())
        return {r.target_id: float(x) for r, x in zip(ranking.results, w / w.sum())}


@dataclass(frozen=True, eq=False)
class TaxonomyNode:
    label: str
    children: tuple["TaxonomyNode", ...] = ()
    classifier: NetworkClassifier | TargetClassifier | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    designation: str | None = None

    def child(self, label: str) -> "TaxonomyNode":
        for c in self.children:
            if c.label == label:
                return c
        raise KeyError(f"{self.label!r} has no child {label!r}")

    def walk(self, depth: int = 0):
        yield self, depth
        for c in self.children:
            yield from c.walk(depth + 1)

    def all_features(self) -> set[str]:
        return set().union(*(n.classifier.features for n, _ in self.walk() if n.classifier))


@dataclass(frozen=True)
class LevelDecision:
    level: str
    depth: int
    beliefs: Mapping[str, float]
    decision: str | None
    conclusive: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {"level": self.level, "depth": self.depth, "beliefs": dict(self.beliefs),
                "decision": self.decision, "conclusive": self.conclusive, "reason": self.reason}


@dataclass(frozen=True)
class Classification:
    label: str
    depth: int
    complete: bool
    trace: tuple[LevelDecision, ...]

    def to_dict(self) -> dict:
        return {"label": self.label, "depth": self.depth, "complete": self.complete,
                "trace": [d.to_dict() for d in self.trace]}


def is_conclusive(beliefs: Mapping[str, float], th: Thresholds) -> bool:
    ranked = sorted(beliefs.values(), reverse=True)
    if not ranked or ranked[0] < th.absolute:
        return False
    if len(ranked) == 1 or ranked[1] == 0:
        return True
    return ranked[0] / ranked[1] >= th.ratio


def classify_hierarchical(root: TaxonomyNode, evidence: Mapping, db=None) -> Classification:
    """Descend while each level is conclusive; otherwise suspend at the last good label."""
    known = root.all_features()
    unknown = set(evidence) - known
    if unknown:
        raise TaxonomyError(f"evidence references features unknown at every level: {sorted(unknown)}")
    node, depth, label = root, 0, root.label
    trace = []
    while node.classifier is not None:
        clf = node.classifier
        relevant = {k: v for k, v in evidence.items() if k in clf.features}
        if not relevant:
            trace.append(LevelDecision(node.label, depth, {}, None, False, "no relevant evidence"))
            return Classification(label, depth, False, tuple(trace))
        beliefs = clf.beliefs(relevant, db)
        top = min(beliefs, key=lambda h: (-beliefs[h], h))
        conclusive = is_conclusive(beliefs, node.thresholds)
        reason = ""
        if isinstance(clf, TargetClassifier) and conclusive:
            ranking = clf.ranking(relevant, db)
            if ranking.rejected:
                conclusive, reason = False, "every T/O ratio below 1"
        if not conclusive:
            reason = reason or "inconclusive"
            trace.append(LevelDecision(node.label, depth, beliefs, None, False, reason))
            return Classification(label, depth, False, tuple(trace))
        trace.append(LevelDecision(node.label, depth, beliefs, top, True))
        if isinstance(clf, TargetClassifier):
            record = db.get(top)
            return Classification(record.class_designation or record.id, depth + 1, True, tuple(trace))
        node = node.child(top)
        depth += 1
        label = node.designation or node.label
    return Classification(label, depth, True, tuple(trace))


def _normalized_priors(priors: Mapping[str, float], labels: Sequence[str]) -> dict[str, float]:
    unknown = set(priors) - set(labels)
    if unknown:
        raise TaxonomyError(f"priors name unknown hypotheses {sorted(unknown)}")
    w = {h: float(priors.get(h, 1.0)) for h in labels}
    if any(v < 0 for v in w.values()):
        raise TaxonomyError("prior weights must be non-negative")
    total = sum(w.values())
    if total <= 0:
        raise TaxonomyError("prior weights are all zero")
    return {h: v / total for h, v in w.items()}


def apply_scenario_priors(node: TaxonomyNode, priors: Mapping[str, float], db=None) -> TaxonomyNode:
    """Return a copy of ``node`` whose classifier uses the given hypothesis priors.

    Hypotheses absent from ``priors`` keep weight 1 before renormalisation.
    """
    clf = node.classifier
    if isinstance(clf, NetworkClassifier):
        if clf.network.parents(clf.hypothesis):
            raise TaxonomyError(f"hypothesis {clf.hypothesis!r} is not a root variable")
        p = _normalized_priors(priors, clf.hypotheses)
        net = clf.network.with_table(clf.hypothesis, [[p[h] for h in clf.hypotheses]])
        return replace(node, classifier=NetworkClassifier(net, clf.hypothesis))
    if isinstance(clf, TargetClassifier):
        labels = list(clf.target_ids) if clf.target_ids is not None else (
            [t.id for t in clf.targets(db)] if db is not None else list(priors))
        p = _normalized_priors(priors, labels)
        # prior odds per T_i module; scale so the uniform case is odds 1
        odds = {h: v * len(labels) for h, v in p.items()}
        return replace(node, classifier=replace(clf, priors=odds))
    raise TaxonomyError(f"node {node.label!r} has no classifier")


def _entropy(p) -> float:
    p = np.asarray([x for x in p if x > 0])
    return float(-(p * np.log(p)).sum())


def expected_entropy(classifier, feature: str, evidence: Mapping, db=None) -> float:
    """Expected entropy of the hypothesis posterior after observing ``feature``."""
    if isinstance(classifier, NetworkClassifier):
        net = classifier.network
        ev = {k: v for k, v in evidence.items() if k in classifier.features}
        pred = posterior_bel(net, ev, feature)
        total = 0.0
        for state, pv in zip(net.var(feature).states, pred):
            if pv > 0:
                total += pv * _entropy(posterior_bel(net, {**ev, feature: state}, classifier.hypothesis))
        return total
    module = classifier.module
    beliefs = classifier.beliefs(evidence, db)
    targets = {t.id: t for t in classifier.targets(db)}
    ids = list(beliefs)
    prior = np.array([beliefs[i] for i in ids])
    lik = np.array([module.expected(targets[i], feature) for i in ids])  # (hyp, value)
    pred = prior @ lik
    total = 0.0
    for k, pv in enumerate(pred):
        if pv > 0:
            total += pv * _entropy(prior * lik[:, k] / pv)
    return total


def next_informative_feature(classifier, candidates: Sequence[str], evidence: Mapping | None = None,
                             db=None) -> str:
    """The unobserved candidate with the lowest expected posterior entropy.

    Ties go to the lexicographically first name.
    """
    evidence = dict(evidence or {})
    pool = sorted(c for c in set(candidates) if c not in evidence)
    if not pool:
        raise ValueError("no unobserved candidate features")
    scores = {c: expected_entropy(classifier, c, evidence, db) for c in pool}
    best = min(scores.values())
    return next(c for c in pool if scores[c] <= best + 1e-12)


# ---------------------------------------------------------------------------
# file format


def _classifier_from_dict(d: Mapping, base: Path, path: tuple[str, ...]):
    kind = d.get("type")
    if kind == "network":
        if "network" in d:
            net = load_network(d["network"])
        elif "network_file" in d:
            net = load_network(base / d["network_file"])
        else:
            raise TaxonomyError("network classifier needs 'network' or 'network_file'")
        if d.get("hypothesis") not in net:
            raise TaxonomyError(f"hypothesis {d.get('hypothesis')!r} is not a network variable")
        return NetworkClassifier(net, d["hypothesis"])
    if kind == "targets":
        feats = [(f["name"], f["states"]) for f in d.get("features", [])]
        ph = d.get("portholes")
        if ph is not None:
            model = ObservationModel(**ph.get("model", {}))
            ph = PortholeFeature(name=ph.get("name", "portholes"), slots=ph.get("slots", 3),
                                 false_budget=ph.get("false_budget", 1), grid=ph.get("grid", 10.0),
                                 model=model)
        ids = tuple(d["targets"]) if "targets" in d else None
        return TargetClassifier(build_to_module(feats, ph), ids, dict(d.get("priors", {})), path)
    raise TaxonomyError(f"unknown classifier type {kind!r}")


def _node_from_dict(d: Mapping, base: Path, path: tuple[str, ...], is_root: bool) -> TaxonomyNode:
    if "label" not in d:
        raise TaxonomyError("every taxonomy node needs a label")
    here = path if is_root else path + (d["label"],)
    children = tuple(_node_from_dict(c, base, here, False) for c in d.get("children", []))
    clf = _classifier_from_dict(d["classifier"], base, here) if "classifier" in d else None
    th = Thresholds(**d.get("thresholds", {}))
    node = TaxonomyNode(d["label"], children, clf, th, d.get("designation"))
    if isinstance(clf, NetworkClassifier):
        missing = set(clf.hypotheses) - {c.label for c in children}
        if missing:
            raise TaxonomyError(f"node {node.label!r}: hypotheses {sorted(missing)} have no child node")
    return node


def load_taxonomy(source, base_dir=None) -> TaxonomyNode:
    if isinstance(source, Mapping):
        doc, base = source, Path(base_dir or ".")
    else:
        p = Path(source)
        doc, base = json.loads(p.read_text()), Path(base_dir or p.parent)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise TaxonomyError("schema_version missing or unsupported")
    return _node_from_dict(doc["root"], base, (), True)


def taxonomy_paths(root: TaxonomyNode) -> set[tuple[str, ...]]:
    out = set()

    def rec(node, path):
        out.add(path)
        for c in node.children:
            rec(c, path + (c.label,))

    rec(root, ())
    return out


def validate_db_paths(root: TaxonomyNode, db) -> None:
    paths = taxonomy_paths(root)
    for t in db:
        if tuple(t.taxonomy_path) not in paths:
            raise TaxonomyError(f"target {t.id!r}: taxonomy path {list(t.taxonomy_path)} does not resolve")
