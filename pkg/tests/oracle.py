"""Brute-force references used by the tests.

Nothing here calls the inference engine or the sequence enumerator: joint
tables are built by full enumeration over every assignment, and outcome
sequences by filtering every token string of bounded length.
"""

from __future__ import annotations

import itertools

import numpy as np


def joint_table(net, evidence=None):
    """Dense joint (times evidence weights) with one axis per variable, declaration order."""
    names = net.names
    cards = [net.var(v).card for v in names]
    joint = np.ones(cards)
    for axis, v in enumerate(names):
        parents = list(net.parents(v))
        cpt = np.asarray(net.table(v))
        # move cpt axes (parents..., child) onto the joint's axis order
        order = [names.index(p) for p in parents] + [axis]
        shape = [1] * len(names)
        for ax in order:
            shape[ax] = cards[ax]
        perm = np.argsort(order)
        joint = joint * np.transpose(cpt, perm).reshape(shape)
    for v, w in (evidence or {}).items():
        axis = names.index(v)
        shape = [1] * len(names)
        shape[axis] = cards[axis]
        joint = joint * np.asarray(w, dtype=float).reshape(shape)
    return joint


def _other_axes(net, query):
    q = net.names.index(query)
    return tuple(i for i in range(len(net.names)) if i != q)


def bel(net, evidence, query):
    j = joint_table(net, evidence).sum(axis=_other_axes(net, query))
    return j / j.sum()


def bel_star_raw(net, evidence, query):
    return joint_table(net, evidence).max(axis=_other_axes(net, query))


def bel_star(net, evidence, query):
    m = bel_star_raw(net, evidence, query)
    return m / m.sum()


def mpe(net, evidence):
    """(best probability, set of maximizing index tuples within a relative 1e-9)."""
    j = joint_table(net, evidence)
    best = j.max()
    winners = {tuple(int(i) for i in idx) for idx in np.argwhere(j >= best * (1 - 1e-9))}
    return float(best), winners


def weights_for(net, evidence):
    """Translate label / weight-vector evidence into dense weight vectors."""
    out = {}
    for v, val in evidence.items():
        states = net.var(v).states
        if isinstance(val, str):
            w = np.zeros(len(states))
            w[states.index(val)] = 1.0
        else:
            w = np.asarray(val, dtype=float)
        out[v] = w
    return out


def outcome_strings(n, m, f):
    """Every non-empty token string over portholes 1..n and W obeying the ordering rules."""
    alphabet = list(range(1, n + 1)) + ["W"]
    found = []
    for length in range(1, m + 1):
        for seq in itertools.product(alphabet, repeat=length):
            holes = [t for t in seq if t != "W"]
            if len(seq) - len(holes) > f:
                continue
            if any(b <= a for a, b in zip(holes, holes[1:])):
                continue
            found.append(seq)
    return found


def random_network(rng, max_vars=6, max_card=3, max_parents=3, zero_prob=0.15):
    """A random DAG over at most ``max_vars`` variables; some CPT entries are zero."""
    from shipbbn import build_network

    n = int(rng.integers(1, max_vars + 1))
    names = [f"V{i}" for i in range(n)]
    cards = [int(rng.integers(2, max_card + 1)) for _ in names]
    variables = [(v, [f"s{k}" for k in range(c)]) for v, c in zip(names, cards)]
    edges, tables = [], {}
    for i, v in enumerate(names):
        k = int(rng.integers(0, min(i, max_parents) + 1))
        parents = sorted(rng.choice(i, size=k, replace=False).tolist()) if k else []
        edges += [(names[p], v) for p in parents]
        rows = []
        for _ in range(int(np.prod([cards[p] for p in parents])) if parents else 1):
            r = rng.random(cards[i]) * (rng.random(cards[i]) > zero_prob)
            if r.sum() == 0:
                r[rng.integers(cards[i])] = 1.0
            rows.append((r / r.sum()).tolist())
        tables[v] = (tuple(names[p] for p in parents), rows)
    return build_network(variables, edges, tables)


def random_evidence(rng, net, p=0.4):
    ev = {}
    for v in net.names:
        if rng.random() < p:
            card = net.var(v).card
            if rng.random() < 0.5:
                ev[v] = net.var(v).states[int(rng.integers(card))]
            else:
                w = rng.random(card)
                w[rng.integers(card)] += 0.1
                ev[v] = w.tolist()
    return ev
