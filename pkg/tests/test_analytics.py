from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats as sstats

from activeforage.analytics import (
    ExportEvent,
    SessionExport,
    compare_groups,
    final_bookmarks,
    keyword_discovery_curve,
    parse_export,
    suggestion_purity,
    throughput_metrics,
    valid_hovers,
    welch_t_test,
    write_comparison_csv,
    write_metrics_csv,
)
from activeforage.errors import NotApplicableError, ProtocolError, ValidationError
from activeforage.policies import PolicySpec
from activeforage.session import InteractionEvent, create_session
from activeforage.synth import make_clustered_dataset
from activeforage.text import KeywordLexicon

import io


def export_of(events, policy_kind="one_step"):
    return SessionExport(
        session_id="s1",
        dataset_ref="d1",
        policy={"kind": policy_kind},
        batch_size=10,
        budget_ms=600_000,
        events=[
            ExportEvent(i, kind, pid, at, 0.5, tuple(sugg))
            for i, (kind, pid, at, sugg) in enumerate(events)
        ],
    )


# -- valid hovers -------------------------------------------------------------


def test_hover_threshold_boundary():
    truth = {1: 1}
    export = export_of(
        [
            ("hover_start", 1, 0, ()),
            ("hover_end", 1, 499, ()),
            ("hover_start", 1, 1000, ()),
            ("hover_end", 1, 1500, ()),
        ]
    )
    hovers = valid_hovers(export.events, truth)
    assert hovers == [(1, 500, True)]  # 499 ms excluded, 500 ms included


def test_hover_interleaved_pairs_by_point():
    truth = {1: 1, 2: 0}
    export = export_of(
        [
            ("hover_start", 1, 0, ()),
            ("hover_start", 2, 100, ()),
            ("hover_end", 1, 700, ()),
            ("hover_end", 2, 1700, ()),
        ]
    )
    hovers = valid_hovers(export.events, truth)
    assert (1, 700, True) in hovers and (2, 1600, False) in hovers


def test_hover_nested_same_point_matches_latest_open():
    truth = {3: 0}
    export = export_of(
        [
            ("hover_start", 3, 0, ()),
            ("hover_start", 3, 1000, ()),
            ("hover_end", 3, 1400, ()),  # pairs with the 1000 start: 400 ms
            ("hover_end", 3, 2000, ()),  # pairs with the 0 start: 2000 ms
        ]
    )
    assert valid_hovers(export.events, truth) == [(3, 2000, False)]


def test_unmatched_hover_end_names_index():
    export = export_of([("hover_start", 1, 0, ()), ("hover_end", 2, 100, ())])
    with pytest.raises(ProtocolError, match="index 1"):
        valid_hovers(export.events, {1: 0, 2: 0})


def test_unclosed_hover_dropped():
    export = export_of([("hover_start", 1, 0, ())])
    assert valid_hovers(export.events, {1: 1}) == []


# -- throughput metrics ---------------------------------------------------------


def three_minute_session():
    """30 valid hovers (12 relevant) plus bookmarks over exactly 3 min."""
    truth = {}
    events = []
    at = 0
    for i in range(30):
        pid = 100 + i
        truth[pid] = 1 if i < 12 else 0
        events.append(("hover_start", pid, at, ()))
        events.append(("hover_end", pid, at + 600, ()))
        at += 1000
    # 4 bookmarks, 3 on relevant points; one later removed
    for j, pid in enumerate((100, 101, 102, 120)):
        events.append(("bookmark_add", pid, 40_000 + j * 100, ()))
    events.append(("bookmark_remove", 102, 50_000, ()))
    events.append(("session_end", None, 180_000, ()))
    return export_of(events), truth


def test_throughput_arithmetic():
    export, truth = three_minute_session()
    tm = throughput_metrics(export, truth)
    assert tm.active_minutes == 3.0
    assert tm.hovers_per_min == pytest.approx(10.0)
    assert tm.relevant_hovers_per_min == pytest.approx(4.0)
    assert tm.hover_purity == pytest.approx(0.4)
    assert tm.bookmarks_per_min == pytest.approx(1.0)
    assert tm.bookmark_purity == pytest.approx(2 / 3)
    assert final_bookmarks(export.events) == [100, 101, 120]


def test_metric_identity_invariant():
    export, truth = three_minute_session()
    tm = throughput_metrics(export, truth)
    assert abs(tm.relevant_hovers_per_min - tm.hover_purity * tm.hovers_per_min) < 1e-9
    assert abs(
        tm.relevant_bookmarks_per_min - tm.bookmark_purity * tm.bookmarks_per_min
    ) < 1e-9


def test_throughput_zero_denominators_flagged():
    export = export_of([("hover_start", 1, 0, ()), ("session_end", None, 60_000, ())])
    tm = throughput_metrics(export, {1: 1})
    assert tm.hover_purity == 0.0 and not tm.hover_purity_defined
    assert tm.bookmark_purity == 0.0 and not tm.bookmark_purity_defined


def test_throughput_minimum_duration_floor():
    export = export_of([("bookmark_add", 1, 0, ())])
    tm = throughput_metrics(export, {1: 1})
    assert tm.active_minutes == pytest.approx(1 / 60)  # floored at one second
    assert tm.bookmarks_per_min == pytest.approx(60.0)


def test_throughput_fixed_duration_mode():
    export, truth = three_minute_session()
    tm = throughput_metrics(export, truth, fixed_duration_ms=600_000)
    assert tm.active_minutes == 10.0
    assert tm.hovers_per_min == pytest.approx(3.0)


def test_throughput_empty_log_rejected():
    with pytest.raises(ValidationError):
        throughput_metrics(export_of([]), {})


def test_bookmark_purity_all_relevant():
    export = export_of(
        [("bookmark_add", 1, 0, ()), ("bookmark_add", 2, 100, ())]
    )
    tm = throughput_metrics(export, {1: 1, 2: 1})
    assert tm.bookmark_purity == 1.0


# -- welch t-test ----------------------------------------------------------------


def test_welch_identical_groups():
    st = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert st.t == 0.0 and st.p == 1.0 and st.d == 0.0


def test_welch_strong_separation():
    rng = np.random.default_rng(1)
    a = (np.zeros(4) + rng.normal(0, 1e-9, 4)).tolist()
    b = (np.ones(4) + rng.normal(0, 1e-9, 4)).tolist()
    st = welch_t_test(a, b)
    assert st.p < 0.001
    assert abs(st.d) > 10


def test_welch_degenerate_equal_constants():
    st = welch_t_test([2.0, 2.0], [2.0, 2.0])
    assert st.t == 0.0 and st.p == 1.0 and st.d == 0.0


def test_welch_matches_scipy_oracle():
    rng = np.random.default_rng(2)
    for _ in range(50):
        na, nb = int(rng.integers(2, 40)), int(rng.integers(2, 40))
        a = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 3), na)
        b = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 3), nb)
        got = welch_t_test(a.tolist(), b.tolist())
        want = sstats.ttest_ind(a, b, equal_var=False)
        assert abs(got.p - want.pvalue) < 1e-6
        assert got.t == pytest.approx(want.statistic, rel=1e-9)


def test_welch_symmetry_under_swap():
    rng = np.random.default_rng(3)
    a = rng.normal(0, 1, 12).tolist()
    b = rng.normal(1, 2, 7).tolist()
    ab = welch_t_test(a, b)
    ba = welch_t_test(b, a)
    assert ab.t == pytest.approx(-ba.t)
    assert ab.d == pytest.approx(-ba.d)
    assert ab.p == pytest.approx(ba.p, abs=1e-12)


def test_welch_group_cis():
    a = [1.0, 2.0, 3.0, 4.0]
    st = welch_t_test(a, [0.0, 0.0, 1.0])
    mean, half = st.ci95_a
    assert mean == pytest.approx(2.5)
    expected_half = sstats.t.ppf(0.975, 3) * np.std(a, ddof=1) / 2.0
    assert half == pytest.approx(expected_half)


def test_welch_needs_two_per_group():
    with pytest.raises(ValidationError):
        welch_t_test([1.0], [1.0, 2.0])


# -- suggestion purity -------------------------------------------------------------


def test_suggestion_purity_counts_distinct_points():
    export = export_of(
        [
            ("bookmark_add", 1, 0, (2, 3)),
            ("bookmark_add", 2, 10, (3, 4)),
        ]
    )
    truth = {1: 1, 2: 1, 3: 0, 4: 1}
    # union shown = {2, 3, 4}; relevant = {2, 4}
    assert suggestion_purity(export, truth) == pytest.approx(2 / 3)


def test_suggestion_purity_all_relevant():
    export = export_of([("bookmark_add", 1, 0, (5, 6))])
    assert suggestion_purity(export, {1: 1, 5: 1, 6: 1}) == 1.0


def test_suggestion_purity_control_not_applicable():
    export = export_of([("bookmark_add", 1, 0, ())], policy_kind="none")
    with pytest.raises(NotApplicableError):
        suggestion_purity(export, {1: 1})
    empty = export_of([("bookmark_add", 1, 0, ())])
    with pytest.raises(NotApplicableError):
        suggestion_purity(empty, {1: 1})


# -- keyword discovery curve ---------------------------------------------------------


def test_keyword_curve_no_bookmarks(clustered_ds):
    export = export_of([("hover_start", int(clustered_ds.ids[0]), 0, ()),
                        ("session_end", None, 150_000, ())])
    curve = keyword_discovery_curve(export, clustered_ds, KeywordLexicon.default())
    assert curve == [(0, 0), (1, 0), (2, 0), (3, 0)]


def test_keyword_curve_distinct_and_monotone(clustered_ds):
    lex = KeywordLexicon.default()
    relevant = [p for p in clustered_ds if p.truth == 1]
    same_kw = [p for p in relevant if "fever" in p.tokens][:2]
    assert len(same_kw) == 2
    events = [
        ("bookmark_add", same_kw[0].id, 10_000, ()),
        ("bookmark_add", same_kw[1].id, 70_000, ()),
        ("session_end", None, 130_000, ()),
    ]
    export = export_of(events)
    curve = keyword_discovery_curve(export, clustered_ds, lex)
    counts = [c for _, c in curve]
    assert counts == sorted(counts)  # monotone
    # both bookmarks hit "fever" (other tokens may add more keywords)
    minute1 = dict(curve)[1]
    assert minute1 >= 1
    hand = len(lex.matched(same_kw[0].tokens))
    assert minute1 == hand


def test_keyword_curve_manual_fixture():
    from activeforage.data import DataPoint, Dataset

    ds = Dataset(
        [
            DataPoint(1, 0, 0, "fever and chills tonight", ("fever", "chills", "tonight")),
            DataPoint(2, 0, 0, "bad cough", ("bad", "cough")),
            DataPoint(3, 0, 0, "fever again", ("fever",)),
        ]
    )
    lex = KeywordLexicon.from_phrases(["fever", "chills", "cough"])
    export = export_of(
        [
            ("bookmark_add", 1, 30_000, ()),
            ("bookmark_add", 2, 90_000, ()),
            ("bookmark_add", 3, 100_000, ()),
        ]
    )
    curve = keyword_discovery_curve(export, ds, lex)
    assert curve == [(0, 0), (1, 2), (2, 3)]


# -- export parsing and csv ------------------------------------------------------------


def test_parse_export_round_trip(clustered_ds):
    s = create_session(clustered_ds, PolicySpec("one_step"), batch_size=5)
    s.apply_event(InteractionEvent("hover_start", int(clustered_ds.ids[0]), 10))
    s.apply_event(InteractionEvent("bookmark_add", int(clustered_ds.ids[0]), 800))
    export = parse_export(s.export_lines())
    assert export.policy_kind == "one_step"
    assert export.group == "search"
    assert len(export.events) == 2
    assert export.events[1].suggestions == s.suggestion_ids()
    assert export.events[1].q == s.rm.q


def test_parse_export_requires_header():
    with pytest.raises(ValidationError):
        parse_export(['{"record": "event", "seq": 0, "kind": "hover_start", "at": 1, "q": 0.5}'])


def test_metrics_csv_and_comparison_csv():
    export, truth = three_minute_session()
    tm = throughput_metrics(export, truth)
    buf = io.StringIO()
    write_metrics_csv([("s1", "search", tm)], buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("session_id,group,hovers_per_min")
    assert len(lines) == 2
    rng = np.random.default_rng(5)
    group_a = [
        throughput_metrics(export, truth, fixed_duration_ms=int(rng.integers(60_000, 600_000)))
        for _ in range(3)
    ]
    tests = compare_groups(group_a, group_a)
    assert set(tests) == {
        "hovers_per_min",
        "relevant_hovers_per_min",
        "hover_purity",
        "bookmarks_per_min",
        "relevant_bookmarks_per_min",
        "bookmark_purity",
    }
    buf2 = io.StringIO()
    write_comparison_csv(tests, buf2)
    assert buf2.getvalue().startswith("metric,mean_a,ci95_a,mean_b,ci95_b,p,t,d")
