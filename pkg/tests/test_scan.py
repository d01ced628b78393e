from __future__ import annotations

import json

import numpy as np
import pytest

from nhtopo import io
from nhtopo.model import MomentumPoint, builtin_FC
from nhtopo.scan import ModelFamily, SweepResult, _match, sweep, threading_report
from nhtopo.topology import ExceptionalPoint, invariants


@pytest.fixture(scope="module")
def fc00_to_fc10():
    return sweep(ModelFamily.linear(builtin_FC(0, 0), builtin_FC(1, 0)), 32, (64, 64))


def test_sweep_between_distinct_classes(fc00_to_fc10):
    r = fc00_to_fc10
    assert r.t[0] == 0.0 and r.t[-1] == 1.0 and r.t == sorted(r.t)
    assert r.intervals[0]["report"].class_label == (0, 0)
    assert r.intervals[-1]["report"].class_label == (0, 1)
    assert max(r.ep_counts()) > 0
    kinds = [e["kind"] for e in r.events]
    assert kinds.count("creation") == kinds.count("annihilation") > 0


def test_tracks_begin_and_end_at_events_or_boundary(fc00_to_fc10):
    for tr in fc00_to_fc10.tracks:
        assert tr.begin == "creation" or tr.t[0] == 0.0
        assert tr.end == "annihilation" or tr.t[-1] == 1.0


def test_charge_neutral_at_every_sample(fc00_to_fc10):
    for eps in fc00_to_fc10.eps:
        assert sum(e.charge for e in eps) == 0
    assert not [a for a in fc00_to_fc10.advisories if a["kind"] == "charge"]


def test_events_bracketed_finely(fc00_to_fc10):
    width = (1.0 / 31) / 2 ** 10
    for e in fc00_to_fc10.events:
        if e["kind"] != "boundary-crossing":
            lo, hi = e["t_interval"]
            assert hi - lo <= width * 1.0001


def test_threading_report_single_flip(fc00_to_fc10):
    rep = threading_report(fc00_to_fc10)
    assert rep["total_flipped_bits"] == 1
    tr = rep["transitions"][0]
    assert tr["flips"]["y"]["0,1"] == 1 and tr["flips"]["x"]["0,1"] == 0
    assert abs(tr["net_threading"]["x"]) == 1


def test_class_constant_inside_intervals(fc00_to_fc10, rng):
    fam = fc00_to_fc10.family
    for iv in fc00_to_fc10.intervals:
        for t in rng.uniform(iv["t_start"], iv["t_end"], 5):
            assert invariants(fam.at(t)).class_label == iv["report"].class_label


def test_threading_along_y():
    r = sweep(ModelFamily.linear(builtin_FC(0, 0), builtin_FC(0, 1)), 16, (64, 64))
    rep = threading_report(r)
    assert rep["transitions"][0]["boundary_crossings"]["y"] >= 1
    assert rep["transitions"][0]["boundary_crossings"]["x"] == 0


def test_constant_family():
    r = sweep(ModelFamily.linear(builtin_FC(1, 1), builtin_FC(1, 1)), 8, (32, 32))
    assert len(r.intervals) == 1
    iv = r.intervals[0]
    assert (iv["t_start"], iv["t_end"]) == (0.0, 1.0)
    assert iv["report"].class_label == (1, 1)
    assert r.events == [] and r.tracks == []
    assert threading_report(r)["total_flipped_bits"] == 0


def test_builtin_parameter_sweep_keeps_eight_tracks():
    r = sweep(ModelFamily.builtin_sweep("TEST", [0.5], 0, 0.2, 0.9), 12, (64, 64))
    assert set(r.ep_counts()) == {8}
    assert len(r.tracks) == 8 and r.events == []
    assert r.intervals == []


def test_matching_respects_charge():
    a = [ExceptionalPoint(MomentumPoint(1.0, 1.0), 2, 0.5, 0.0)]
    b = [ExceptionalPoint(MomentumPoint(1.01, 1.0), 2, -0.5, 0.0),
         ExceptionalPoint(MomentumPoint(1.2, 1.0), 2, 0.5, 0.0)]
    assert _match(a, b, 0.3) == {0: 1}
    assert _match(a, b[:1], 0.3) == {}


def test_thread_count_does_not_change_results():
    fam = ModelFamily.linear(builtin_FC(0, 0), builtin_FC(1, 1))
    one = sweep(fam, 8, (32, 32), workers=1)
    many = sweep(fam, 8, (32, 32), workers=4)
    assert io.dumps(one.to_dict()) == io.dumps(many.to_dict())


def test_sweep_result_round_trip(fc00_to_fc10):
    text = io.dumps(fc00_to_fc10.to_dict())
    back = SweepResult.from_dict(json.loads(text))
    assert io.dumps(back.to_dict()) == text


def test_t_count_minimum():
    with pytest.raises(ValueError):
        sweep(ModelFamily.linear(builtin_FC(0, 0), builtin_FC(1, 0)), 4, (32, 32))


def test_family_interpolates_entrywise():
    fam = ModelFamily.linear(builtin_FC(0, 0), builtin_FC(1, 1), None)
    k = (0.3, 1.1)
    expect = 0.7 * builtin_FC(0, 0).evaluate(k) + 0.3 * builtin_FC(1, 1).evaluate(k)
    np.testing.assert_allclose(fam.at(0.3).evaluate(k), expect, atol=1e-14)
