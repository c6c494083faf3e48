"""Per-target {T | O} evaluation: one structural network, re-instantiated per target.

A :class:`TOModule` holds the target-independent structure: a root with
states ``T`` (this database target) and ``O`` (anything else, all errors
equally likely) and one child per feature whose ``O`` column is uniform.
Evaluating a target compares each observation with the target's stored
description, yielding a likelihood pair per feature; porthole sightings go
through an SD observation network built for the target's layout.  Pairs
are multiplied across features in log space, the prior odds applied once,
and the result normalised to ``bel*(T) + bel*(O) = 1``.

Features that were not observed still contribute their best-case pair
(largest ``T`` entry against the uniform ``O`` entry); this is what bel*
over the bound network does and keeps target ratios proportional to bel*
of a single network holding every target.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .inference import (ContradictoryEvidence, EvidenceSet, LikelihoodFinding, bel_star,
                        log_bel_star, mpe_assignment)
from .network import BeliefNetwork, build_network
from .obsnet import (NOT_OBS, ObservationModel, ObservationProblem, build_exhaustive_net,
                     build_porthole_classifier, quantize, sd_net, sighting_evidence)
from .shipdb import TargetRecord

log = logging.getLogger(__name__)

ROOT = "Target"
REJECT_MESSAGE = "Target is something else."


@dataclass(frozen=True)
class PortholeFeature:
    """How porthole sightings are explained inside every target's module."""

    name: str = "portholes"
    slots: int = 3
    false_budget: int = 1
    grid: float = 10.0
    model: ObservationModel = field(default_factory=ObservationModel)

    def problem(self, target: TargetRecord) -> ObservationProblem:
        return ObservationProblem(target.portholes, target.hatches, self.slots,
                                  self.false_budget, self.grid, self.model)


@dataclass(frozen=True, eq=False)
class TOModule:
    network: BeliefNetwork
    features: tuple[tuple[str, tuple[str, ...]], ...]
    portholes: PortholeFeature | None = None

    @property
    def feature_names(self) -> list[str]:
        names = [f for f, _ in self.features]
        if self.portholes is not None:
            names.append(self.portholes.name)
        return names

    def states(self, feature: str) -> tuple[str, ...]:
        for f, s in self.features:
            if f == feature:
                return s
        raise KeyError(f"unknown feature {feature!r}")

    def expected(self, target: TargetRecord, feature: str) -> np.ndarray:
        """The target's stored distribution over the feature's states."""
        states = self.states(feature)
        if feature not in target.features:
            raise KeyError(f"target {target.id!r} has no description of {feature!r}")
        dist = target.features[feature]
        stray = set(dist) - set(states)
        if stray:
            raise KeyError(f"target {target.id!r} feature {feature!r} uses unknown states {sorted(stray)}")
        return np.array([dist.get(s, 0.0) for s in states])

    def bind(self, target: TargetRecord, priors=(0.5, 0.5)) -> BeliefNetwork:
        """A fresh network with the T columns filled from ``target``."""
        tables = {ROOT: list(priors)}
        for f, states in self.features:
            tables[f] = [list(self.expected(target, f)), [1.0 / len(states)] * len(states)]
        return build_network([(ROOT, ["T", "O"])] + [(f, s) for f, s in self.features],
                             [(ROOT, f) for f, _ in self.features], tables)


def build_to_module(features: Sequence, portholes: PortholeFeature | None = None) -> TOModule:
    """Structural module for categorical ``(name, states)`` features.

    T columns are uniform placeholders; :meth:`TOModule.bind` fills them.
    """
    feats = tuple((str(name), tuple(states)) for name, states in features)
    if not feats and portholes is None:
        raise ValueError("a module needs at least one feature")
    tables = {ROOT: [0.5, 0.5]}
    for name, states in feats:
        u = [1.0 / len(states)] * len(states)
        tables[name] = [u, u]
    net = build_network([(ROOT, ["T", "O"])] + list(feats), [(ROOT, f) for f, _ in feats], tables)
    return TOModule(net, feats, portholes)


def error_evidence(module: TOModule, target: TargetRecord, feature: str,
                   observation: str) -> LikelihoodFinding:
    """Likelihood of ``observation`` under ``T`` (this target) and ``O`` (random)."""
    states = module.states(feature)
    if observation not in states:
        raise ValueError(f"{observation!r} is not a state of feature {feature!r}")
    k = states.index(observation)
    t_weight = float(module.expected(target, feature)[k])
    return LikelihoodFinding(ROOT, (t_weight, 1.0 / len(states)))


@dataclass(frozen=True)
class EvaluationResult:
    target_id: str
    bel_star_T: float
    bel_star_O: float
    ratio: float
    log_ratio: float
    explanation: Mapping = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"target": self.target_id, "bel_star_T": self.bel_star_T,
                "bel_star_O": self.bel_star_O, "ratio": self.ratio,
                "explanation": dict(self.explanation)}


def combine_feature_scores(pairs) -> tuple[float, float]:
    """Multiply per-feature (T, O) scores and renormalise, in log space."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one feature score")
    with np.errstate(divide="ignore"):
        lt = float(sum(np.log(t) for t, _ in pairs))
        lo = float(sum(np.log(o) for _, o in pairs))
    return _normalize_pair(lt, lo)


def _normalize_pair(lt: float, lo: float) -> tuple[float, float]:
    if lt == -np.inf and lo == -np.inf:
        raise ContradictoryEvidence("both T and O have zero mass")
    top = max(lt, lo)
    t, o = math.exp(lt - top), math.exp(lo - top)
    return t / (t + o), o / (t + o)


def _porthole_pair(module: TOModule, target: TargetRecord, obs, structure: str):
    p = module.portholes.problem(target)
    if obs is None:
        ev = EvidenceSet()
    elif isinstance(obs, Mapping):
        ev = sighting_evidence(p, findings=obs)
    else:
        ev = sighting_evidence(p, list(obs))
    net = sd_net(p) if structure == "sd" else build_exhaustive_net(p)
    lv = log_bel_star(net, ev, ROOT) - math.log(0.5)
    explanation = None
    if np.isfinite(lv[0]):
        assignment, _ = mpe_assignment(net, {**ev, ROOT: LikelihoodFinding(ROOT, (1.0, 0.0))})
        explanation = {k: v for k, v in assignment.items() if k.endswith("-Alts") or k == "Outcome"}
    return float(lv[0]), float(lv[1]), explanation


def feature_log_pairs(module: TOModule, target: TargetRecord, observations: Mapping,
                      structure: str = "sd"):
    """Per-feature ``(log T score, log O score, explanation)``."""
    known = set(module.feature_names)
    unknown = set(observations) - known
    if unknown:
        raise KeyError(f"observations reference unknown features {sorted(unknown)}")
    out = {}
    for name, states in module.features:
        expected = module.expected(target, name)
        lo = -math.log(len(states))
        with np.errstate(divide="ignore"):
            if name in observations:
                f = error_evidence(module, target, name, observations[name])
                lt = float(np.log(f.weights[0]))
                out[name] = (lt, lo, observations[name])
            else:
                out[name] = (float(np.log(expected.max())), lo, states[int(np.argmax(expected))])
    if module.portholes is not None:
        name = module.portholes.name
        obs = observations.get(name)
        out[name] = _porthole_pair(module, target, obs, structure)
    return out


def evaluate_target(module: TOModule, target: TargetRecord, observations: Mapping,
                    prior_odds: float = 1.0, structure: str = "sd") -> EvaluationResult:
    """bel* over {T, O} for one target; an impossible target gets ratio 0."""
    if prior_odds < 0:
        raise ValueError("prior odds must be non-negative")
    pairs = feature_log_pairs(module, target, observations, structure)
    with np.errstate(divide="ignore"):
        lt = sum(p[0] for p in pairs.values()) + float(np.log(prior_odds))
    lo = sum(p[1] for p in pairs.values())
    bt, bo = _normalize_pair(lt, lo)
    log_ratio = lt - lo
    ratio = 0.0 if log_ratio == -np.inf else math.exp(min(log_ratio, 700.0))
    return EvaluationResult(target.id, bt, bo, ratio, log_ratio,
                            {k: v[2] for k, v in pairs.items()})


@dataclass(frozen=True)
class Ranking:
    results: tuple[EvaluationResult, ...]
    rejected: bool

    def ratios(self) -> dict[str, float]:
        return {r.target_id: r.ratio for r in self.results}

    def to_dict(self) -> dict:
        return {"rejected": self.rejected, "results": [r.to_dict() for r in self.results]}


def constant_o_scores(db, module: TOModule, observations: Mapping, structure: str = "sd",
                      tol: float = 1e-12) -> bool:
    """Whether every target assigns the same bel*(O) score to ``observations``.

    This is the condition under which T/O ratios are proportional to the
    single-network bel* over targets.
    """
    scores = [sum(p[1] for p in feature_log_pairs(module, t, observations, structure).values())
              for t in db]
    return max(scores) - min(scores) <= tol if scores else True


def rank_targets(db, module: TOModule, observations: Mapping, priors: Mapping | None = None,
                 workers: int = 1, structure: str = "sd") -> Ranking:
    """Evaluate every target and sort by descending ratio, ties by id.

    ``priors`` optionally maps target id to prior odds of T against O.
    """
    targets = list(db)
    if not targets:
        raise ValueError("the target database is empty")
    priors = priors or {}

    def run(t):
        return evaluate_target(module, t, observations, priors.get(t.id, 1.0), structure)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, targets))
    else:
        results = [run(t) for t in targets]
    results.sort(key=lambda r: (-r.log_ratio, r.target_id))
    return Ranking(tuple(results), all(r.ratio < 1 for r in results))


def reject_decision(ranking: Ranking):
    """``("reject", message)`` when every ratio is below 1, else ``("accept", results)``."""
    if ranking.rejected:
        return "reject", REJECT_MESSAGE
    return "accept", ranking.results


def build_monolithic(db, module: TOModule, priors: Mapping | None = None,
                     with_portholes: bool = False) -> BeliefNetwork:
    """All targets in one node with one child per categorical feature.

    With ``with_portholes`` the porthole explanations of every target hang
    off the same node (see :func:`build_porthole_classifier`); hatches are
    not modelled there.
    """
    ids = [t.id for t in db]
    w = np.array([(priors or {}).get(i, 1.0) for i in ids], dtype=float)
    variables = [(ROOT, ids)] + list(module.features)
    edges = [(ROOT, f) for f, _ in module.features]
    tables = {ROOT: list(w / w.sum())}
    for name, _ in module.features:
        tables[name] = [list(module.expected(t, name)) for t in db]
    if with_portholes and module.portholes is not None:
        ph = module.portholes
        base = build_porthole_classifier({t.id: t.portholes for t in db}, ph.slots,
                                         ph.false_budget, ph.grid, ph.model).to_dict()
        for v in base["variables"][1:]:
            variables.append((v["name"], v["states"]))
        edges += [tuple(e) for e in base["edges"]]
        for tab in base["tables"][1:]:
            tables[tab["child"]] = (tuple(tab["parents"]), tab["rows"])
    return build_network(variables, edges, tables)


def monolithic_bel_star(db, module: TOModule, observations: Mapping,
                        with_portholes: bool = False) -> np.ndarray:
    """Normalised bel* of every target in the single-network formulation."""
    net = build_monolithic(db, module, with_portholes=with_portholes)
    ev = {k: v for k, v in observations.items() if k in dict(module.features)}
    if with_portholes and module.portholes is not None:
        ev.update(_joint_porthole_evidence(net, module.portholes, observations.get(module.portholes.name)))
    return bel_star(net, ev, ROOT)


def _joint_porthole_evidence(net: BeliefNetwork, ph: PortholeFeature, obs) -> dict:
    if obs is None:
        return {}
    if isinstance(obs, Mapping):
        raise ValueError("the joint network takes hard sightings only")
    locs = sorted(float(x) for x in obs)
    if len(locs) > ph.slots:
        raise ValueError(f"{len(locs)} sightings exceed {ph.slots} observation slots")
    out = {}
    for t in range(1, ph.slots + 1):
        states = net.var(f"O{t}").states
        out[f"O{t}"] = states[quantize(locs[t - 1], ph.grid)] if t <= len(locs) else NOT_OBS
    return out


def evidence_balance(module: TOModule, db, limit: float = 100.0) -> dict[str, float]:
    """Largest odds factor each categorical feature can contribute for any target.

    Logs a warning when the strongest feature can outweigh the weakest by
    more than ``limit``; never blocks evaluation.
    """
    report = {}
    for name, states in module.features:
        best = 0.0
        for t in db:
            if name in t.features:
                best = max(best, float(module.expected(t, name).max()) * len(states))
        report[name] = best
    vals = [v for v in report.values() if v > 0]
    if len(vals) > 1 and max(vals) / min(vals) > limit:
        strongest = max(report, key=report.get)
        log.warning("feature %r can dominate the decision (max odds %.3g vs min %.3g)",
                    strongest, max(vals), min(vals))
    return report
