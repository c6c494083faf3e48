"""``shipbbn`` command line.

Every command prints one report (JSON by default, ``--format table`` for
people) and exits with:

    0  success
    2  invalid input (bad flags, unreadable or malformed files)
    3  exhaustive build refused by the state cap (only with --strict)
    4  contradictory evidence (every hypothesis has zero mass)

All input files are read and validated before anything is computed, and
nothing is written to stdout when a command fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .inference import ContradictoryEvidence, bel_star, posterior_bel
from .network import NetworkError, save_network
from .obsnet import (DEFAULT_CAP, ObservationModel, ObservationProblem, StateSpaceTooLarge,
                     build_exhaustive_net, build_sd_net, count_outcomes, sighting_evidence)
from .shipdb import DatabaseError, SimulationConfig, load_db, simulate_observations
from .taxonomy import TaxonomyError, classify_hierarchical, load_taxonomy, validate_db_paths
from .toengine import (REJECT_MESSAGE, ROOT, PortholeFeature, build_to_module,
                       monolithic_bel_star, rank_targets)

EXIT_OK, EXIT_INVALID, EXIT_CAP, EXIT_CONTRADICTION = 0, 2, 3, 4


class InputError(ValueError):
    """Raised for anything wrong with the user's files or flags."""


# ---------------------------------------------------------------------------
# input helpers


def _read_json(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{what} {path}: {exc.strerror}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _object(doc, what: str, allowed: set[str]) -> dict:
    if not isinstance(doc, dict):
        raise InputError(f"{what}: expected a JSON object")
    stray = set(doc) - allowed
    if stray:
        raise InputError(f"{what}: unknown fields {sorted(stray)}")
    return doc


def _problem(doc) -> ObservationProblem:
    doc = _object(doc, "problem", {"portholes", "hatches", "slots", "false_budget", "grid", "model"})
    try:
        model = ObservationModel(**doc.get("model", {}))
        return ObservationProblem(tuple(doc.get("portholes", ())), tuple(doc.get("hatches", ())),
                                  int(doc.get("slots", 3)), int(doc.get("false_budget", 1)),
                                  float(doc.get("grid", 10.0)), model)
    except (TypeError, ValueError) as exc:
        raise InputError(f"problem: {exc}") from None


def _porthole_feature(doc, sightings) -> PortholeFeature:
    doc = _object(doc or {}, "porthole_feature", {"name", "slots", "false_budget", "grid", "model"})
    n = len(sightings) if isinstance(sightings, list) else 0
    try:
        return PortholeFeature(doc.get("name", "portholes"), int(doc.get("slots", max(3, n))),
                               int(doc.get("false_budget", 1)), float(doc.get("grid", 10.0)),
                               ObservationModel(**doc.get("model", {})))
    except (TypeError, ValueError) as exc:
        raise InputError(f"porthole_feature: {exc}") from None


def _feature_states(db) -> list[tuple[str, tuple[str, ...]]]:
    """Categorical features of the database, states in first-seen order."""
    feats: dict[str, list[str]] = {}
    for t in db:
        for name, dist in t.features.items():
            states = feats.setdefault(name, [])
            states.extend(s for s in dist if s not in states)
    return [(name, tuple(states)) for name, states in sorted(feats.items())]


def _check_observations(obs: dict, features, porthole_name: str):
    known = dict(features)
    for name, value in obs.items():
        if name == porthole_name:
            if not isinstance(value, list) or not all(isinstance(x, (int, float)) for x in value):
                raise InputError(f"observations.{name}: expected a list of locations")
            if any(not 0 <= x <= 100 for x in value):
                raise InputError(f"observations.{name}: locations must lie in [0, 100]")
        elif name not in known:
            raise InputError(f"observations.{name}: unknown feature")
        elif value not in known[name]:
            raise InputError(f"observations.{name}: {value!r} is not one of {list(known[name])}")


def _digest(args, texts) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(_echo(args), sort_keys=True).encode())
    for t in texts:
        h.update(b"\0" + t.encode())
    return h.hexdigest()


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "format")}


def _pair(v) -> dict:
    return {"T": float(v[0]), "O": float(v[1])}


# ---------------------------------------------------------------------------
# commands; each returns (results, exit status, table lines)


def cmd_count(args):
    for flag in ("portholes", "slots", "false"):
        if getattr(args, flag) < 0:
            raise InputError(f"--{flag} must be non-negative")
    total, by_w = count_outcomes(args.portholes, args.slots, args.false)
    res = {"n": args.portholes, "m": args.slots, "f": args.false, "total": total,
           "by_false_count": {str(j): c for j, c in by_w.items()}, "cap": args.cap,
           "exhaustive_within_cap": total <= args.cap}
    lines = [f"outcomes for n={args.portholes} m={args.slots} f={args.false}: {total}"]
    lines += [f"  #W={j}: {c}" for j, c in by_w.items()]
    return res, EXIT_OK, [], lines


def _structure_report(build, p, ev, cap):
    try:
        net = build(p, cap)
    except StateSpaceTooLarge as exc:
        return {"refused": {"count": exc.count, "sequences": exc.sequences, "cap": exc.cap}}, None
    cards = {v: net.var(v).card for v in net.names}
    return {"refused": None,
            "states": {"per_node": cards, "max": max(cards.values()), "total": sum(cards.values())},
            "bel_star": _pair(bel_star(net, ev, ROOT)),
            "bel": _pair(posterior_bel(net, ev, ROOT))}, net


def cmd_compare(args, problem_doc, evidence_doc):
    p = _problem(problem_doc)
    evidence_doc = _object(evidence_doc, "evidence", {"sightings", "findings"})
    try:
        ev = sighting_evidence(p, evidence_doc.get("sightings", ()), evidence_doc.get("findings"))
    except (TypeError, ValueError) as exc:
        raise InputError(f"evidence: {exc}") from None
    ex, _ = _structure_report(build_exhaustive_net, p, ev, args.cap)
    sd, _ = _structure_report(build_sd_net, p, ev, args.cap)
    res = {"exhaustive": ex, "sd": sd, "tolerance": args.tolerance,
           "outcomes": count_outcomes(p.n, p.slots, p.false_budget)[0]}
    warnings = []
    if ex["refused"] is None and sd["refused"] is None:
        diff = max(abs(ex["bel_star"][k] - sd["bel_star"][k]) for k in "TO")
        res["bel_star_max_abs_diff"] = diff
        res["bel_star_equal"] = diff <= args.tolerance
        res["bel_max_abs_diff"] = max(abs(ex["bel"][k] - sd["bel"][k]) for k in "TO")
    else:
        res["bel_star_equal"] = None
    lines = []
    for name, r in (("exhaustive", ex), ("sd", sd)):
        if r["refused"]:
            msg = f"{name}: refused, {r['refused']['count']} states exceed cap {r['refused']['cap']}"
            warnings.append(msg)
            lines.append(msg)
        else:
            lines.append(f"{name:<10} bel*T={r['bel_star']['T']:.6f} bel*O={r['bel_star']['O']:.6f} "
                         f"belT={r['bel']['T']:.6f} max states={r['states']['max']}")
    if res["bel_star_equal"] is not None:
        lines.append(f"bel* equal within {args.tolerance:g}: {'yes' if res['bel_star_equal'] else 'NO'}")
    status = EXIT_CAP if warnings and args.strict else EXIT_OK
    return res, status, warnings, lines


def cmd_network(args, problem_doc):
    p = _problem(problem_doc)
    build = build_sd_net if args.structure == "sd" else build_exhaustive_net
    try:
        net = build(p, args.cap)
    except StateSpaceTooLarge as exc:
        res = {"refused": {"count": exc.count, "sequences": exc.sequences, "cap": exc.cap}}
        msg = f"refused: {exc.count} states exceed cap {exc.cap}"
        return res, EXIT_CAP if args.strict else EXIT_OK, [msg], [msg]
    doc = json.loads(save_network(net))
    res = {"structure": args.structure, "hash": net.structural_hash(), "network": doc}
    return res, EXIT_OK, [], [save_network(net)]


def _rank_inputs(db, evidence_doc):
    evidence_doc = _object(evidence_doc, "evidence", {"observations", "priors", "porthole_feature"})
    obs = evidence_doc.get("observations", {})
    if not isinstance(obs, dict):
        raise InputError("observations: expected an object")
    ph = _porthole_feature(evidence_doc.get("porthole_feature"), obs.get("portholes"))
    if ph.name != "portholes" and "portholes" in obs:
        obs = {ph.name if k == "portholes" else k: v for k, v in obs.items()}
    features = _feature_states(db)
    _check_observations(obs, features, ph.name)
    if isinstance(obs.get(ph.name), list) and len(obs[ph.name]) > ph.slots:
        raise InputError(f"observations.{ph.name}: more sightings than {ph.slots} slots")
    for t in db:
        missing = [f for f, _ in features if f not in t.features]
        if missing:
            raise InputError(f"target {t.id!r} lacks features {missing}")
    priors = evidence_doc.get("priors", {})
    if set(priors) - set(db.ids):
        raise InputError(f"priors: unknown targets {sorted(set(priors) - set(db.ids))}")
    return build_to_module(features, ph), obs, {k: float(v) for k, v in priors.items()}


def cmd_rank(args, db, evidence_doc):
    if not len(db):
        raise InputError("database: no targets")
    module, obs, priors = _rank_inputs(db, evidence_doc)
    ranking = rank_targets(db, module, obs, priors, workers=args.workers)
    warnings = []
    try:
        joint = monolithic_bel_star(db, module, obs, with_portholes=True)
        joint = dict(zip(db.ids, map(float, joint)))
    except StateSpaceTooLarge as exc:
        joint = None
        warnings.append(f"joint network refused: {exc.count} states exceed cap {exc.cap}")
    except ContradictoryEvidence:
        joint = None
        warnings.append("joint network: evidence impossible for every target")
    res = ranking.to_dict()
    for r in res["results"]:
        r["joint_bel_star"] = None if joint is None else joint[r["target"]]
    res["decision"] = REJECT_MESSAGE if ranking.rejected else ranking.results[0].target_id
    lines = [f"{'target':<12}{'T/O ratio':>14}{'bel*(T)':>12}{'joint bel*':>12}"]
    for r in res["results"]:
        jb = "-" if r["joint_bel_star"] is None else f"{r['joint_bel_star']:.6f}"
        lines.append(f"{r['target']:<12}{r['ratio']:>14.6g}{r['bel_star_T']:>12.6f}{jb:>12}")
    lines.append(REJECT_MESSAGE if ranking.rejected else f"best match: {res['decision']}")
    status = EXIT_CAP if warnings and args.strict else EXIT_OK
    return res, status, warnings, lines


def cmd_classify(args, taxonomy_doc, taxonomy_path, db, evidence_doc):
    try:
        root = load_taxonomy(taxonomy_doc, Path(taxonomy_path).parent)
        validate_db_paths(root, db)
    except (TaxonomyError, NetworkError, KeyError, TypeError) as exc:
        raise InputError(f"taxonomy: {exc}") from None
    evidence_doc = _object(evidence_doc, "evidence", {"observations"})
    obs = evidence_doc.get("observations", {})
    if not isinstance(obs, dict):
        raise InputError("observations: expected an object")
    unknown = set(obs) - root.all_features()
    if unknown:
        raise InputError(f"observations: features unknown at every level {sorted(unknown)}")
    result = classify_hierarchical(root, obs, db)
    res = result.to_dict()
    lines = []
    for d in result.trace:
        b = ", ".join(f"{k}={v:.4f}" for k, v in d.beliefs.items())
        verdict = f"-> {d.decision}" if d.conclusive else f"suspended ({d.reason})"
        lines.append(f"{'  ' * d.depth}{d.level}: {b} {verdict}")
    lines.append(f"{'final' if result.complete else 'partial'} label: {result.label}")
    return res, EXIT_OK, [], lines


def cmd_simulate(args, db, config_doc):
    cfg_doc = _object(config_doc or {}, "config",
                      {"illumination", "false_rate", "grid", "overrides"})
    try:
        cfg = SimulationConfig(float(cfg_doc.get("illumination", 0.7)),
                               float(cfg_doc.get("false_rate", 0.1)),
                               float(cfg_doc.get("grid", 10.0)), args.seed,
                               {int(k): float(v) for k, v in cfg_doc.get("overrides", {}).items()})
    except (TypeError, ValueError) as exc:
        raise InputError(f"config: {exc}") from None
    targets = [db.get(args.target)] if args.target else list(db)
    if args.nights < 1:
        raise InputError("--nights must be at least 1")
    rng = np.random.default_rng(args.seed)
    runs = []
    for t in targets:
        for night in range(args.nights):
            runs.append({"target": t.id, "night": night,
                         "observations": {"portholes": simulate_observations(t, cfg, rng)}})
    res = {"seed": args.seed, "config": {"illumination": cfg.illumination, "false_rate": cfg.false_rate,
                                         "grid": cfg.grid, "overrides": {str(k): v for k, v in cfg.overrides.items()}},
           "runs": runs}
    lines = [f"{r['target']:<12} night {r['night']}: {r['observations']['portholes']}" for r in runs]
    return res, EXIT_OK, [], lines


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "table"), default="json",
                        help="report format (default: json)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--tolerance", type=float, default=1e-9,
                        help="bel* equality tolerance (default: 1e-9)")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP,
                        help=f"largest exhaustive outcome space to build (default: {DEFAULT_CAP})")
    common.add_argument("--strict", action="store_true",
                        help="exit with status 3 when a build is refused by the cap")

    ap = argparse.ArgumentParser(prog="shipbbn", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog="exit status: 0 ok, 2 invalid input, "
                                        "3 cap refusal (--strict), 4 contradictory evidence")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", parents=[common], help="count porthole explanation sequences")
    p.add_argument("--portholes", type=int, required=True)
    p.add_argument("--slots", type=int, required=True)
    p.add_argument("--false", type=int, required=True, help="false detections allowed")

    p = sub.add_parser("compare", parents=[common], help="exhaustive vs sequential-decomposition networks")
    p.add_argument("problem", help="problem JSON (portholes, hatches, slots, false_budget, grid)")
    p.add_argument("evidence", help="evidence JSON (sightings and/or findings)")

    p = sub.add_parser("network", parents=[common], help="print an observation network as JSON")
    p.add_argument("problem")
    p.add_argument("--structure", choices=("sd", "exhaustive"), default="sd")

    p = sub.add_parser("rank", parents=[common], help="rank database targets against observations")
    p.add_argument("db")
    p.add_argument("evidence", help="evidence JSON (observations, priors, porthole_feature)")
    p.add_argument("--workers", type=int, default=1, help="threads for per-target evaluation (default: 1)")

    p = sub.add_parser("classify", parents=[common], help="coarse-to-fine classification")
    p.add_argument("taxonomy")
    p.add_argument("db")
    p.add_argument("evidence")

    p = sub.add_parser("simulate", parents=[common], help="simulate porthole sightings")
    p.add_argument("db")
    p.add_argument("--config", help="simulation config JSON")
    p.add_argument("--target", help="only this target id")
    p.add_argument("--nights", type=int, default=1)
    return ap


def _load_db(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"database {path}: {exc.strerror}") from None
    try:
        return load_db(text), text
    except DatabaseError as exc:
        raise InputError(f"database {path}: {exc}") from None


def _run(args):
    """Read every input, then dispatch.  Returns (results, status, warnings, lines, texts)."""
    if args.command == "count":
        return (*cmd_count(args), [])
    if args.command in ("compare", "network"):
        prob, ptext = _read_json(args.problem, "problem")
        if args.command == "network":
            return (*cmd_network(args, prob), [ptext])
        ev, etext = _read_json(args.evidence, "evidence")
        return (*cmd_compare(args, prob, ev), [ptext, etext])
    if args.command == "rank":
        if args.workers < 1:
            raise InputError("--workers must be at least 1")
        db, dtext = _load_db(args.db)
        ev, etext = _read_json(args.evidence, "evidence")
        return (*cmd_rank(args, db, ev), [dtext, etext])
    if args.command == "classify":
        tax, ttext = _read_json(args.taxonomy, "taxonomy")
        db, dtext = _load_db(args.db)
        ev, etext = _read_json(args.evidence, "evidence")
        return (*cmd_classify(args, tax, args.taxonomy, db, ev), [ttext, dtext, etext])
    if args.command == "simulate":
        db, dtext = _load_db(args.db)
        cfg, ctext = _read_json(args.config, "config") if args.config else (None, "")
        if args.target and args.target not in db.ids:
            raise InputError(f"--target: unknown target id {args.target!r}")
        return (*cmd_simulate(args, db, cfg), [dtext, ctext])
    raise InputError(f"unknown command {args.command!r}")  # pragma: no cover


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        results, status, warnings, lines, texts = _run(args)
    except InputError as exc:
        print(f"shipbbn: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ContradictoryEvidence as exc:
        print(f"shipbbn: contradictory evidence: {exc}", file=sys.stderr)
        return EXIT_CONTRADICTION
    except (ValueError, KeyError) as exc:
        print(f"shipbbn: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.format == "table":
        out = "\n".join(lines)
    else:
        report = {"command": {"name": args.command, "args": _echo(args)},
                  "inputs_digest": _digest(args, texts), "results": results,
                  "warnings": warnings, "exit_status": status}
        out = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    sys.stdout.write(out + "\n")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
