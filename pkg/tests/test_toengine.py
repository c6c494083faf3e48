import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shipbbn import (ShipDatabase, TargetRecord, bel_star, evaluate_target, rank_targets,
                     reject_decision)
from shipbbn.toengine import (REJECT_MESSAGE, ROOT, PortholeFeature, build_monolithic,
                              build_to_module, combine_feature_scores, error_evidence,
                              evidence_balance, monolithic_bel_star)
from shipbbn import fixtures as F


@pytest.fixture
def tables():
    return ShipDatabase(F.two_feature_records()), F.two_feature_module()


def test_error_evidence_pairs(tables):
    db, module = tables
    f = error_evidence(module, db.get("S2"), "Stern", "Curved")
    assert f.variable == ROOT and f.weights == (0.8, 1 / 3)
    with pytest.raises(ValueError):
        error_evidence(module, db.get("S2"), "Stern", "Square")


def test_ratio_by_hand(tables):
    db, module = tables
    r = evaluate_target(module, db.get("S1"), {"Bow": "<25%"})
    # observed bow: 1.0 vs 1/2; unobserved stern: best 0.7 vs 1/3
    assert r.ratio == pytest.approx(2.0 * 2.1)
    assert r.bel_star_T == pytest.approx(4.2 / 5.2)
    assert r.explanation == {"Bow": "<25%", "Stern": "Round"}


def test_bound_module_reproduces_evaluation(tables):
    db, module = tables
    for t in db:
        net = module.bind(t)
        got = bel_star(net, {"Stern": "Straight"}, ROOT)
        r = evaluate_target(module, t, {"Stern": "Straight"})
        assert got == pytest.approx([r.bel_star_T, r.bel_star_O])


def test_bound_networks_share_structure(tables):
    db, module = tables
    hashes = {module.bind(t).structural_hash() for t in db}
    assert len(hashes) == len(db)  # same graph, different numbers
    shapes = {tuple(module.bind(t).table(f).shape for f in ("Bow", "Stern")) for t in db}
    assert len(shapes) == 1


def test_prior_odds_scale_ratio(tables):
    db, module = tables
    base = evaluate_target(module, db.get("S3"), {"Bow": ">=25%"})
    tilted = evaluate_target(module, db.get("S3"), {"Bow": ">=25%"}, prior_odds=3.0)
    assert tilted.ratio == pytest.approx(3 * base.ratio)
    with pytest.raises(ValueError):
        evaluate_target(module, db.get("S3"), {}, prior_odds=-1)


def test_unknown_feature_rejected(tables):
    db, module = tables
    with pytest.raises(KeyError):
        evaluate_target(module, db.get("S1"), {"Funnel": "tall"})


def test_rank_order_and_reject(tables):
    db, module = tables
    ranking = rank_targets(db, module, {"Bow": "<25%", "Stern": "Round"})
    assert [r.target_id for r in ranking.results] == ["S1", "S2", "S3"]
    assert reject_decision(ranking)[0] == "accept"
    odd = ShipDatabase([TargetRecord("A", features={"Bow": {"<25%": 0.3, ">=25%": 0.7},
                                                    "Stern": {"Round": 0.3, "Curved": 0.3, "Straight": 0.4}})])
    low = rank_targets(odd, module, {"Bow": "<25%", "Stern": "Round"})
    assert low.rejected and reject_decision(low) == ("reject", REJECT_MESSAGE)


def test_ratio_of_exactly_one_is_not_rejected():
    module = build_to_module([("X", ("a", "b"))])
    db = ShipDatabase([TargetRecord("A", features={"X": {"a": 0.5, "b": 0.5}})])
    ranking = rank_targets(db, module, {"X": "a"})
    assert ranking.results[0].ratio == 1.0 and not ranking.rejected


def test_ties_broken_by_id():
    module = build_to_module([("X", ("a", "b"))])
    same = {"X": {"a": 0.9, "b": 0.1}}
    db = ShipDatabase([TargetRecord(i, features=same) for i in ("c", "a", "b")])
    assert [r.target_id for r in rank_targets(db, module, {"X": "a"}).results] == ["a", "b", "c"]


def test_parallel_ranking_is_identical():
    db = F.sample_database()
    module = F.two_feature_module(PortholeFeature(slots=4))
    obs = {"Stern": "Curved", "portholes": [30, 60]}
    serial = rank_targets(db, module, obs)
    parallel = rank_targets(db, module, obs, workers=4)
    assert serial == parallel


def test_porthole_feature_and_explanation():
    db = F.sample_database()
    module = F.two_feature_module(PortholeFeature(slots=4))
    r = evaluate_target(module, db.get("S1"), {"portholes": [20, 40, 70]})
    assert r.ratio > 1
    alts = r.explanation["portholes"]
    assert alts and all(k.endswith("-Alts") for k in alts)
    wrong = evaluate_target(module, db.get("S1"), {"portholes": [90, 95, 100]})
    assert wrong.ratio == 0.0 and wrong.explanation["portholes"] is None


def test_structures_give_same_target_scores():
    db = F.sample_database()
    module = F.two_feature_module(PortholeFeature(slots=3))
    obs = {"portholes": [20, 60]}
    for t in db:
        a = evaluate_target(module, t, obs, structure="sd")
        b = evaluate_target(module, t, obs, structure="exhaustive")
        assert a.log_ratio == pytest.approx(b.log_ratio, abs=1e-9)


def test_combine_scores():
    assert combine_feature_scores([(0.5, 0.5), (0.9, 0.3)]) == pytest.approx((0.75, 0.25))
    with pytest.raises(ValueError):
        combine_feature_scores([])


def test_joint_network_matches_three_target_classifier():
    db = ShipDatabase(F.three_target_records())
    module = build_to_module([], PortholeFeature(slots=1, false_budget=0))
    got = monolithic_bel_star(db, module, {"portholes": [30]}, with_portholes=True)
    assert np.allclose(got, [0.5, 0.5, 0.0])


def test_evidence_balance_warns(caplog):
    module = build_to_module([("X", ("a", "b")), ("Y", tuple(f"y{i}" for i in range(300)))])
    y = {f"y{i}": 0.0 for i in range(300)}
    y["y0"] = 1.0
    db = ShipDatabase([TargetRecord("A", features={"X": {"a": 0.5, "b": 0.5}, "Y": y})])
    with caplog.at_level(logging.WARNING):
        report = evidence_balance(module, db)
    assert report["Y"] == pytest.approx(300) and "dominate" in caplog.text


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ratios_proportional_to_monolithic_bel_star(seed):
    rng = np.random.default_rng(seed)
    feats = [("F0", ("a", "b", "c")), ("F1", ("p", "q"))]
    recs = []
    for i in range(int(rng.integers(2, 6))):
        dists = {}
        for name, states in feats:
            w = rng.random(len(states)) + 0.01
            dists[name] = dict(zip(states, (w / w.sum()).tolist()))
        recs.append(TargetRecord(f"T{i}", features=dists))
    db = ShipDatabase(recs)
    module = build_to_module(feats)
    obs = {"F0": "b"} if rng.random() < 0.5 else {"F0": "c", "F1": "p"}
    ratios = np.array([rank_targets(db, module, obs).ratios()[i] for i in db.ids])
    mono = bel_star(build_monolithic(db, module), obs, ROOT)
    assert np.abs(ratios / ratios.sum() - mono).max() <= 1e-9
