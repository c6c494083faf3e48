"""Observation networks for the porthole / false-detection problem.

Two constructions of the same observation model:

* the exhaustive network: ``Target -> Outcome -> O1..Om`` where ``Outcome``
  lists every legal explanation sequence of the observations jointly;
* the sequential-decomposition (SD) network: ``Target -> O1-Alts -> ... ->
  Om-Alts``, one small explanation node per observation slot.

Observation model shared by both
--------------------------------
A T-side explanation is a sequence of tokens: porthole indices (strictly
increasing) and at most ``false_budget`` false detections ``W``.  Its prior
is proportional to ``porthole_weight ** #portholes * false_weight ** #W``,
normalised over all legal sequences.  Slot ``t`` then emits

* a porthole token: peak mass on the porthole's nearest bin, the rest spread
  evenly over the other bins within one grid step (see
  :func:`porthole_emission`);
* a ``W`` token: uniform over the location bins;
* past the end of the sequence: ``NOT-OBS`` with certainty.

Under ``O`` (any other ship class) slot 1 is uniform over the bins; later
slots put ``1 / (1 + false_weight)`` on ``NOT-OBS`` and split the rest
evenly over the bins.  That balance makes an extra unexplained observation
cost ``T`` and ``O`` the same factor, so one false detection never
penalises a target.

SD encoding
-----------
``Ot-Alts`` carries ``(last porthole matched, false detections used)``
after ``t`` observations, plus ``NO`` (sequence already ended) and ``O``.
The slot's token is recovered from the step between consecutive states, so
each evidence node ``Ot`` hangs off both ``O(t-1)-Alts`` and ``Ot-Alts``.
Sequences map one-to-one onto chain paths and the transition tables are
built from weighted completion counts, so every path carries exactly its
sequence's prior; bel* of ``Target`` therefore agrees between the two
structures while each ``Ot-Alts`` stays at ``(n + 1)(f + 1) + 1`` states
at most.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from .inference import EvidenceSet, LikelihoodFinding
from .network import BeliefNetwork, build_network

W = "W"
NO = "NO"
OTHER = "O"
NOT_OBS = "NOT-OBS"
DEFAULT_CAP = 10 ** 5


class StateSpaceTooLarge(RuntimeError):
    """The exhaustive construction would exceed the configured state cap."""

    def __init__(self, count: int, cap: int, sequences: int | None = None):
        self.count = count
        self.cap = cap
        self.sequences = count if sequences is None else sequences
        what = f"{self.sequences} explanation sequences, " if sequences is not None else ""
        super().__init__(
            f"exhaustive outcome node would need {what}{count} states (cap {cap}); "
            f"raise the cap or use the SD network")


@dataclass(frozen=True)
class ObservationModel:
    """Numeric calibration of the observation model.

    The defaults are tuned so that the 3-porthole, 1-false-detection target
    with a single soft sighting ``{5:20:5:1:1:1:1:1:1}`` gives
    ``bel*(T) ~= 0.778``.
    """

    peak: float = 0.8
    porthole_weight: float = 1.0
    false_weight: float = 6.2

    def __post_init__(self):
        if not 0 < self.peak <= 1:
            raise ValueError("peak must lie in (0, 1]")
        if self.porthole_weight <= 0 or self.false_weight <= 0:
            raise ValueError("sequence weights must be positive")

    @property
    def other_not_observed(self) -> float:
        return 1.0 / (1.0 + self.false_weight)


@dataclass(frozen=True)
class ObservationProblem:
    portholes: tuple[float, ...]
    hatches: tuple[float, ...] = ()
    slots: int = 3
    false_budget: int = 1
    grid: float = 10.0
    model: ObservationModel = field(default_factory=ObservationModel)

    def __post_init__(self):
        object.__setattr__(self, "portholes", tuple(float(x) for x in self.portholes))
        object.__setattr__(self, "hatches", tuple(float(x) for x in self.hatches))
        if any(b <= a for a, b in zip(self.portholes, self.portholes[1:])):
            raise ValueError("porthole locations must be strictly increasing")
        if any(not 0 <= x <= 100 for x in self.portholes + self.hatches):
            raise ValueError("locations must lie in [0, 100]")
        if not 0 < self.grid <= 100:
            raise ValueError("grid must lie in (0, 100]")
        if self.slots < 1:
            raise ValueError("need at least one observation slot")
        if self.false_budget < 0:
            raise ValueError("false_budget must be non-negative")
        if not self.bins:
            raise ValueError("grid leaves no interior location bins")

    @property
    def n(self) -> int:
        return len(self.portholes)

    @property
    def bins(self) -> tuple[float, ...]:
        return location_bins(self.grid)

    def bin_labels(self) -> list[str]:
        return [_pct(b) for b in self.bins]

    def slot_states(self, t: int) -> list[str]:
        """States of evidence node ``Ot`` (1-based)."""
        labels = self.bin_labels()
        return labels if t == 1 else labels + [NOT_OBS]


def location_bins(grid: float) -> tuple[float, ...]:
    k = int(round(100.0 / grid))
    return tuple(round(i * grid, 9) for i in range(1, k) if i * grid < 100 - 1e-9)


def _pct(x: float) -> str:
    return f"{x:g}%"


# ---------------------------------------------------------------------------
# outcome sequences


@dataclass(frozen=True, order=True)
class OutcomeSequence:
    """Ordered explanation tokens: porthole indices (1-based) and ``"W"``."""

    tokens: tuple

    def __len__(self):
        return len(self.tokens)

    @property
    def false_count(self) -> int:
        return sum(1 for x in self.tokens if x == W)

    @property
    def porthole_count(self) -> int:
        return len(self.tokens) - self.false_count

    def label(self, sep: str = "") -> str:
        return sep.join(str(x) for x in self.tokens)

    def __str__(self):
        wide = any(x != W and x >= 10 for x in self.tokens)
        return self.label("." if wide else "")


def enumerate_outcomes(n: int, m: int, f: int) -> list[OutcomeSequence]:
    """Every legal explanation of 1..m observations, length-major then lexicographic.

    Within a length, porthole indices sort numerically and ``W`` sorts after
    every porthole.
    """
    if n < 0 or m < 1 or f < 0:
        raise ValueError("need n >= 0, m >= 1, f >= 0")
    by_len: list[list[tuple]] = [[] for _ in range(m + 1)]

    def grow(seq, last, used):
        if seq:
            by_len[len(seq)].append(seq)
        if len(seq) == m:
            return
        for j in range(last + 1, n + 1):
            grow(seq + (j,), j, used)
        if used < f:
            grow(seq + (W,), last, used + 1)

    grow((), 0, 0)
    key = lambda seq: tuple(n + 1 if x == W else x for x in seq)
    return [OutcomeSequence(s) for length in by_len for s in sorted(length, key=key)]


def count_outcomes(n: int, m: int, f: int) -> tuple[int, dict[int, int]]:
    """Closed-form outcome count and its split by number of false detections.

    With ``j`` false detections and ``k`` portholes, the portholes are a
    ``k``-subset (order forced) and the ``W`` tokens take ``j`` of the
    ``k + j`` positions.
    """
    if n < 0 or m < 1 or f < 0:
        raise ValueError("need n >= 0, m >= 1, f >= 0")
    cases = {}
    for j in range(f + 1):
        cases[j] = sum(comb(k + j, j) * comb(n, k)
                       for k in range(0, n + 1) if 1 <= k + j <= m)
    return sum(cases.values()), cases


def sequence_weight(seq: OutcomeSequence, model: ObservationModel) -> float:
    return model.porthole_weight ** seq.porthole_count * model.false_weight ** seq.false_count


# ---------------------------------------------------------------------------
# measurement model


def match_explanations(obs: float, p: ObservationProblem) -> set[int]:
    """1-based indices of portholes within one grid step of ``obs``."""
    if not 0 <= obs <= 100:
        raise ValueError("observation must lie in [0, 100]")
    return {i + 1 for i, loc in enumerate(p.portholes) if abs(loc - obs) <= p.grid + 1e-9}


def nearest_bin(loc: float, grid: float) -> int:
    bins = np.array(location_bins(grid))
    return int(np.argmin(np.abs(bins - loc) + 1e-12 * np.arange(len(bins))))


def porthole_emission(loc: float, p: ObservationProblem) -> np.ndarray:
    """Distribution over location bins for a sighting of the porthole at ``loc``."""
    bins = np.array(p.bins)
    support = np.abs(bins - loc) <= p.grid + 1e-9
    peak = nearest_bin(loc, p.grid)
    support[peak] = True
    out = np.zeros(len(bins))
    others = np.flatnonzero(support)
    others = others[others != peak]
    if others.size:
        out[peak] = p.model.peak
        out[others] = (1.0 - p.model.peak) / others.size
    else:
        out[peak] = 1.0
    return out


def _emission_row(kind, p: ObservationProblem, t: int, porthole: int = 0) -> list[float]:
    nb = len(p.bins)
    extra = [] if t == 1 else [0.0]
    if kind == "porthole":
        return list(porthole_emission(p.portholes[porthole - 1], p)) + extra
    if kind == W:
        return [1.0 / nb] * nb + extra
    if kind == NO:
        if t == 1:
            return [1.0 / nb] * nb  # unreachable: slot 1 always holds a sighting
        return [0.0] * nb + [1.0]
    if kind == OTHER:
        if t == 1:
            return [1.0 / nb] * nb
        q = p.model.other_not_observed
        return [(1.0 - q) / nb] * nb + [q]
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# exhaustive construction


def build_exhaustive_net(p: ObservationProblem, cap: int = DEFAULT_CAP) -> BeliefNetwork:
    total, _ = count_outcomes(p.n, p.slots, p.false_budget)
    if total + 1 > cap:
        raise StateSpaceTooLarge(total + 1, cap, total)
    seqs = enumerate_outcomes(p.n, p.slots, p.false_budget)
    labels = [str(s) for s in seqs] + [OTHER]
    weights = np.array([sequence_weight(s, p.model) for s in seqs])
    prior_t = list(weights / weights.sum()) + [0.0]
    prior_o = [0.0] * len(seqs) + [1.0]

    variables = [("Target", ["T", "O"]), ("Outcome", labels)]
    edges = [("Target", "Outcome")]
    tables = {"Target": [0.5, 0.5], "Outcome": [prior_t, prior_o]}
    for t in range(1, p.slots + 1):
        name = f"O{t}"
        variables.append((name, p.slot_states(t)))
        edges.append(("Outcome", name))
        rows = []
        for s in seqs:
            if t <= len(s):
                tok = s.tokens[t - 1]
                rows.append(_emission_row(W, p, t) if tok == W
                            else _emission_row("porthole", p, t, tok))
            else:
                rows.append(_emission_row(NO, p, t))
        rows.append(_emission_row(OTHER, p, t))
        tables[name] = rows
    return build_network(variables, edges, tables)


# ---------------------------------------------------------------------------
# sequential decomposition


def _state_label(last: int, used: int) -> str:
    return W * used + (str(last) if last else "")


def _reachable(n: int, f: int, t: int) -> list[tuple[int, int]]:
    """(last porthole, W used) pairs possible right after observation ``t``."""
    out = []
    for used in range(0, min(f, t) + 1):
        matched = t - used
        if matched > n:
            continue
        if matched == 0:
            out.append((0, used))
        else:
            out.extend((last, used) for last in range(matched, n + 1))
    return sorted(out, key=lambda s: (s[1], s[0]))


@dataclass(frozen=True)
class SDStateSpace:
    slots: tuple[tuple[str, ...], ...]

    def sizes(self) -> list[int]:
        return [len(s) for s in self.slots]

    def slot(self, t: int) -> tuple[str, ...]:
        return self.slots[t - 1]


def sd_state_space(n: int, f: int, slots: int | None = None) -> SDStateSpace:
    """Per-slot ``Ot-Alts`` labels; by default every slot that can hold a sighting."""
    if n < 1 or f < 0:
        raise ValueError("need n >= 1 and f >= 0")
    m = n + f if slots is None else slots
    return SDStateSpace(tuple(
        tuple(_state_label(*s) for s in _reachable(n, f, t)) + (NO, OTHER)
        for t in range(1, m + 1)))


def _completions(p: ObservationProblem):
    """Weighted completion counts F[t][(last, used)] for the SD transitions."""
    a, b = p.model.porthole_weight, p.model.false_weight
    m, n, f = p.slots, p.n, p.false_budget
    F: dict[int, dict[tuple[int, int], float]] = {m: {s: 1.0 for s in _reachable(n, f, m)}}
    for t in range(m - 1, 0, -1):
        nxt = F[t + 1]
        F[t] = {}
        for last, used in _reachable(n, f, t):
            total = 1.0  # stop here
            for j in range(last + 1, n + 1):
                total += a * nxt.get((j, used), 0.0)
            if used < f:
                total += b * nxt.get((last, used + 1), 0.0)
            F[t][(last, used)] = total
    return F


def build_sd_net(p: ObservationProblem, cap: int = DEFAULT_CAP) -> BeliefNetwork:
    a, b = p.model.porthole_weight, p.model.false_weight
    n, f, m = p.n, p.false_budget, p.slots
    F = _completions(p)
    states = [_reachable(n, f, t) for t in range(1, m + 1)]
    size = max(len(s) for s in states) + 2
    if size > cap:
        raise StateSpaceTooLarge(size, cap)

    variables = [("Target", ["T", "O"])]
    edges = []
    tables = {"Target": [0.5, 0.5]}
    start = (0, 0)
    for t in range(1, m + 1):
        alts = f"O{t}-Alts"
        cur = states[t - 1]
        labels = [_state_label(*s) for s in cur] + [NO, OTHER]
        k = len(labels)
        variables.append((alts, labels))
        prev_name = "Target" if t == 1 else f"O{t - 1}-Alts"
        edges.append((prev_name, alts))

        if t == 1:
            z = sum((a if last else b) * F[1][(last, used)] for last, used in cur)
            row_t = [(a if last else b) * F[1][(last, used)] / z for last, used in cur] + [0.0, 0.0]
            rows = [row_t, [0.0] * (k - 1) + [1.0]]
            prev_states = [start]
        else:
            prev_states = states[t - 2]
            rows = []
            for last, used in prev_states:
                row = [0.0] * k
                Fp = F[t - 1][(last, used)]
                for i, (l2, u2) in enumerate(cur):
                    if u2 == used and l2 > last:
                        row[i] = a * F[t][(l2, u2)] / Fp
                    elif u2 == used + 1 and l2 == last:
                        row[i] = b * F[t][(l2, u2)] / Fp
                row[k - 2] = 1.0 / Fp
                rows.append(row)
            rows.append([0.0] * (k - 2) + [1.0, 0.0])  # NO stays NO
            rows.append([0.0] * (k - 1) + [1.0])  # O stays O
        tables[alts] = rows

        ev = f"O{t}"
        variables.append((ev, p.slot_states(t)))
        edges.append((alts, ev))
        if t == 1:
            ev_rows = []
            for last, used in cur:
                ev_rows.append(_emission_row(W, p, 1) if used else _emission_row("porthole", p, 1, last))
            ev_rows.append(_emission_row(NO, p, 1))
            ev_rows.append(_emission_row(OTHER, p, 1))
            tables[ev] = ((alts,), ev_rows)
        else:
            edges.append((prev_name, ev))
            ev_rows = []
            prev_all = list(prev_states) + [NO, OTHER]
            cur_all = list(cur) + [NO, OTHER]
            for ps in prev_all:
                for cs in cur_all:
                    ev_rows.append(_sd_emission(ps, cs, p, t))
            tables[ev] = ((prev_name, alts), ev_rows)
    return build_network(variables, edges, tables)


def _sd_emission(prev, cur, p, t):
    if cur == OTHER:
        return _emission_row(OTHER, p, t)
    if cur == NO:
        return _emission_row(NO, p, t)
    if isinstance(prev, tuple):
        (l1, u1), (l2, u2) = prev, cur
        if u2 == u1 and l2 > l1:
            return _emission_row("porthole", p, t, l2)
        if u2 == u1 + 1 and l2 == l1:
            return _emission_row(W, p, t)
    return _emission_row(W, p, t)  # transition has zero probability


# ---------------------------------------------------------------------------
# evidence helpers


def quantize(obs: float, grid: float) -> int:
    """Index of the location bin a sighting at ``obs`` percent falls in."""
    return nearest_bin(obs, grid)


def sighting_evidence(p: ObservationProblem, sightings: Sequence[float] = (),
                      findings: dict | None = None) -> EvidenceSet:
    """Evidence for hard sightings (sorted bow to stern) and/or raw slot findings.

    Slots that receive neither a sighting nor an explicit finding are marked
    ``NOT-OBS``.
    """
    sightings = sorted(float(x) for x in sightings)
    findings = dict(findings or {})
    if len(sightings) > p.slots:
        raise ValueError(f"{len(sightings)} sightings exceed {p.slots} observation slots")
    out = []
    for t in range(1, p.slots + 1):
        name = f"O{t}"
        states = p.slot_states(t)
        if t <= len(sightings):
            if name in findings:
                raise ValueError(f"slot {name} has both a sighting and a finding")
            k = quantize(sightings[t - 1], p.grid)
            out.append(LikelihoodFinding.hard(name, states, states[k]))
        elif name in findings:
            w = tuple(findings.pop(name))
            if t > 1 and len(w) == len(states) - 1:
                w = w + (0.0,)  # a bin-only likelihood rules out NOT-OBS
            out.append(LikelihoodFinding(name, w))
        elif t > 1:
            out.append(LikelihoodFinding.hard(name, states, NOT_OBS))
    if set(findings) - {f"O{t}" for t in range(1, p.slots + 1)}:
        raise ValueError(f"findings for unknown slots {sorted(findings)}")
    return EvidenceSet(out)


@lru_cache(maxsize=None)
def _cached_sd(p: ObservationProblem) -> BeliefNetwork:
    return build_sd_net(p)


def sd_net(p: ObservationProblem) -> BeliefNetwork:
    """Memoised :func:`build_sd_net` (networks are immutable)."""
    return _cached_sd(p)


# ---------------------------------------------------------------------------
# several targets in one network


def build_porthole_classifier(targets: dict, slots: int = 1, false_budget: int = 0,
                              grid: float = 10.0, model: ObservationModel | None = None,
                              cap: int = DEFAULT_CAP) -> BeliefNetwork:
    """One ``Target`` node over named layouts, exhaustive explanations beneath.

    Every sequence keeps its absolute weight (divided by one constant shared
    by all targets), and the leftover goes to a ``none`` outcome that emits
    ``NOT-OBS`` everywhere.  A target with more ways to explain a sighting
    therefore gains posterior mass, which is what separates bel from bel*.
    """
    model = model or ObservationModel()
    problems = {tid: ObservationProblem(tuple(locs), slots=slots, false_budget=false_budget,
                                        grid=grid, model=model)
                for tid, locs in targets.items()}
    size = sum(count_outcomes(pr.n, slots, false_budget)[0] for pr in problems.values()) + 1
    if size > cap:
        raise StateSpaceTooLarge(size, cap)
    seqs = {tid: enumerate_outcomes(pr.n, slots, false_budget) for tid, pr in problems.items()}
    totals = {tid: sum(sequence_weight(s, model) for s in ss) for tid, ss in seqs.items()}
    scale = 1.0 + max(totals.values())

    labels, owners = [], []
    for tid, ss in seqs.items():
        for s in ss:
            labels.append(f"{tid}:{s}")
            owners.append((tid, s))
    labels.append("none")
    ids = list(targets)
    outcome_rows = []
    for tid in ids:
        row = [sequence_weight(s, model) / scale if owner == tid else 0.0 for owner, s in owners]
        row.append(1.0 - sum(row))
        outcome_rows.append(row)

    variables = [("Target", ids), ("Outcome", labels)]
    edges = [("Target", "Outcome")]
    tables = {"Target": [1.0 / len(ids)] * len(ids), "Outcome": outcome_rows}
    any_pr = next(iter(problems.values()))
    nb = len(any_pr.bins)
    for t in range(1, slots + 1):
        name = f"O{t}"
        variables.append((name, any_pr.bin_labels() + [NOT_OBS]))
        edges.append(("Outcome", name))
        rows = []
        for tid, s in owners:
            if t <= len(s):
                tok = s.tokens[t - 1]
                rows.append(_emission_row(W, problems[tid], 2) if tok == W
                            else _emission_row("porthole", problems[tid], 2, tok))
            else:
                rows.append([0.0] * nb + [1.0])
        rows.append([0.0] * nb + [1.0])
        tables[name] = rows
    return build_network(variables, edges, tables)
