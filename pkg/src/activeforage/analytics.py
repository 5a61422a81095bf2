"""Foraging-throughput metrics and statistical comparisons over session
exports.

All functions are pure over (export, truth, lexicon). Hover and
bookmark rates come in two flavors: active time (first to last event,
the default) or a fixed allotted duration.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as _sstats

from .data import Dataset
from .errors import NotApplicableError, ProtocolError, ValidationError
from .text import KeywordLexicon

VALID_HOVER_MS = 500

METRIC_FIELDS = (
    "hovers_per_min",
    "relevant_hovers_per_min",
    "hover_purity",
    "bookmarks_per_min",
    "relevant_bookmarks_per_min",
    "bookmark_purity",
)


@dataclass(frozen=True)
class ExportEvent:
    seq: int
    kind: str
    point_id: int | None
    at: int
    q: float
    suggestions: tuple[int, ...]


@dataclass
class SessionExport:
    """Parsed line-delimited session export (header + event records)."""

    session_id: str
    dataset_ref: str
    policy: dict
    batch_size: int
    budget_ms: int
    events: list[ExportEvent]

    @property
    def policy_kind(self) -> str:
        return self.policy.get("kind", "none")

    @property
    def group(self) -> str:
        """Study arm implied by the policy: control vs assisted search."""
        return "control" if self.policy_kind == "none" else "search"


def parse_export(src: str | Path | IO[str] | Iterable[str]) -> SessionExport:
    """Parse a session export from a path, file object, or lines."""
    if hasattr(src, "read"):
        lines = src.read().splitlines()
    elif isinstance(src, (str, Path)) and "\n" not in str(src) and Path(src).exists():
        lines = Path(src).read_text(encoding="utf-8").splitlines()
    elif isinstance(src, str):
        lines = src.splitlines()
    else:
        lines = list(src)
    header = None
    events: list[ExportEvent] = []
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        rec = json.loads(raw)
        kind = rec.get("record")
        if kind == "session":
            header = rec
        elif kind == "event":
            events.append(
                ExportEvent(
                    seq=int(rec["seq"]),
                    kind=rec["kind"],
                    point_id=rec.get("point_id"),
                    at=int(rec["at"]),
                    q=float(rec["q"]),
                    suggestions=tuple(rec.get("suggestions", ())),
                )
            )
        else:
            raise ValidationError(f"line {lineno}: unknown record type {kind!r}")
    if header is None:
        raise ValidationError("export has no session header record")
    return SessionExport(
        session_id=header.get("session_id", ""),
        dataset_ref=header.get("dataset_ref", ""),
        policy=header.get("policy", {"kind": "none"}),
        batch_size=int(header.get("batch_size", 10)),
        budget_ms=int(header.get("budget_ms", 600_000)),
        events=events,
    )


def valid_hovers(
    events: Sequence[ExportEvent],
    truth: Mapping[int, int],
    min_ms: int = VALID_HOVER_MS,
) -> list[tuple[int, int, bool]]:
    """Hover intervals lasting at least ``min_ms`` as (point id,
    duration ms, relevant).

    hover_end pairs with the latest open hover_start on the same point;
    an end without an open start is a protocol error naming the event
    index. Hovers left open are dropped.
    """
    open_starts: dict[int, list[int]] = {}
    out: list[tuple[int, int, bool]] = []
    for i, ev in enumerate(events):
        if ev.kind == "hover_start":
            open_starts.setdefault(ev.point_id, []).append(ev.at)
        elif ev.kind == "hover_end":
            stack = open_starts.get(ev.point_id)
            if not stack:
                raise ProtocolError(
                    f"unmatched hover_end at event index {i} (point {ev.point_id})"
                )
            started = stack.pop()
            duration = ev.at - started
            if duration >= min_ms:
                out.append((ev.point_id, duration, bool(truth[ev.point_id])))
    return out


def final_bookmarks(events: Sequence[ExportEvent]) -> list[int]:
    """Bookmarked point ids surviving to the end of the log."""
    current: dict[int, None] = {}
    for ev in events:
        if ev.kind == "bookmark_add":
            current[ev.point_id] = None
        elif ev.kind == "bookmark_remove":
            current.pop(ev.point_id, None)
    return list(current)


@dataclass
class ThroughputMetrics:
    hovers_per_min: float
    relevant_hovers_per_min: float
    hover_purity: float
    bookmarks_per_min: float
    relevant_bookmarks_per_min: float
    bookmark_purity: float
    active_minutes: float
    hover_purity_defined: bool = True
    bookmark_purity_defined: bool = True


def throughput_metrics(
    export: SessionExport,
    truth: Mapping[int, int],
    fixed_duration_ms: int | None = None,
) -> ThroughputMetrics:
    """The six speed/accuracy metrics for one session.

    Time base is first-to-last event (floored at one second) unless a
    fixed allotted duration is given. Undefined purities (zero
    denominator) report 0 and are flagged.
    """
    events = export.events
    if not events:
        raise ValidationError("empty session log")
    if fixed_duration_ms is not None:
        span_ms = fixed_duration_ms
    else:
        span_ms = events[-1].at - events[0].at
    minutes = max(span_ms, 1000) / 60_000.0
    hovers = valid_hovers(events, truth)
    n_hover = len(hovers)
    n_hover_rel = sum(1 for _, _, rel in hovers if rel)
    marks = final_bookmarks(events)
    n_marks = len(marks)
    n_marks_rel = sum(1 for pid in marks if truth[pid])
    hover_purity = (n_hover_rel / n_hover) if n_hover else 0.0
    mark_purity = (n_marks_rel / n_marks) if n_marks else 0.0
    return ThroughputMetrics(
        hovers_per_min=n_hover / minutes,
        relevant_hovers_per_min=(n_hover_rel / n_hover) * (n_hover / minutes)
        if n_hover
        else 0.0,
        hover_purity=hover_purity,
        bookmarks_per_min=n_marks / minutes,
        relevant_bookmarks_per_min=(n_marks_rel / n_marks) * (n_marks / minutes)
        if n_marks
        else 0.0,
        bookmark_purity=mark_purity,
        active_minutes=minutes,
        hover_purity_defined=n_hover > 0,
        bookmark_purity_defined=n_marks > 0,
    )


@dataclass
class StatTest:
    """Two-sample comparison: Welch t, two-sided p, Cohen's d (pooled
    SD), and a Student-t 95% CI (mean, half-width) per group."""

    t: float
    p: float
    d: float
    ci95_a: tuple[float, float]
    ci95_b: tuple[float, float]
    df: float


def _group_ci(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    half = float(_sstats.t.ppf(0.975, n - 1) * values.std(ddof=1) / math.sqrt(n))
    return float(values.mean()), half


def welch_t_test(group_a: Sequence[float], group_b: Sequence[float]) -> StatTest:
    """Welch's unequal-variance t-test of two groups."""
    a = np.asarray(list(group_a), dtype=np.float64)
    b = np.asarray(list(group_b), dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValidationError("each group needs at least 2 values")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValidationError("groups must be finite")
    na, nb = a.size, b.size
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    se2 = va / na + vb / nb
    if se2 == 0.0:
        t = 0.0 if ma == mb else math.copysign(math.inf, ma - mb)
        p = 1.0 if t == 0.0 else 0.0
        df = float(na + nb - 2)
    else:
        t = (ma - mb) / math.sqrt(se2)
        df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
        p = float(2.0 * _sstats.t.sf(abs(t), df))
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    if pooled == 0.0:
        d = 0.0 if ma == mb else math.copysign(math.inf, ma - mb)
    else:
        d = (ma - mb) / pooled
    return StatTest(
        t=float(t), p=float(p), d=float(d),
        ci95_a=_group_ci(a), ci95_b=_group_ci(b), df=float(df),
    )


def suggestion_purity(export: SessionExport, truth: Mapping[int, int]) -> float:
    """Fraction of all distinct suggested points that are truly relevant."""
    if export.policy_kind == "none":
        raise NotApplicableError("control sessions receive no suggestions")
    shown: set[int] = set()
    for ev in export.events:
        shown.update(ev.suggestions)
    if not shown:
        raise NotApplicableError("no suggestions were ever shown")
    return sum(truth[pid] for pid in shown) / len(shown)


def keyword_discovery_curve(
    export: SessionExport, ds: Dataset, lexicon: KeywordLexicon
) -> list[tuple[int, int]]:
    """Distinct lexicon keywords matched in bookmarks so far, sampled
    per minute (non-decreasing step curve).

    Discovery is cumulative over bookmark_add events; later removals do
    not un-discover a keyword.
    """
    hits: list[tuple[int, frozenset[str]]] = []
    for ev in export.events:
        if ev.kind == "bookmark_add":
            matched = lexicon.matched(ds.by_id(ev.point_id).tokens)
            if matched:
                hits.append((ev.at, frozenset(matched)))
    last_at = export.events[-1].at if export.events else 0
    minutes = math.ceil(last_at / 60_000.0)
    curve: list[tuple[int, int]] = []
    for minute in range(minutes + 1):
        cutoff = minute * 60_000
        seen: set[str] = set()
        for at, matched in hits:
            if at <= cutoff:
                seen.update(matched)
        curve.append((minute, len(seen)))
    return curve


# ---------------------------------------------------------------------------
# tabular export
# ---------------------------------------------------------------------------


def write_metrics_csv(
    rows: Sequence[tuple[str, str, ThroughputMetrics]],
    dest: str | Path | IO[str],
) -> None:
    """One row per session: (session id, group, the six metrics)."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["session_id", "group", *METRIC_FIELDS, "active_minutes"])
        for session_id, group, tm in rows:
            writer.writerow(
                [session_id, group]
                + [repr(getattr(tm, f)) for f in METRIC_FIELDS]
                + [repr(tm.active_minutes)]
            )
    finally:
        if own:
            fh.close()


def compare_groups(
    metrics_a: Sequence[ThroughputMetrics],
    metrics_b: Sequence[ThroughputMetrics],
) -> dict[str, StatTest]:
    """Welch test per metric between two session groups."""
    out = {}
    for name in METRIC_FIELDS:
        out[name] = welch_t_test(
            [getattr(tm, name) for tm in metrics_a],
            [getattr(tm, name) for tm in metrics_b],
        )
    return out


def write_comparison_csv(
    tests: Mapping[str, StatTest], dest: str | Path | IO[str]
) -> None:
    """Summary table: metric, CI per group, p, t, d."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(
            ["metric", "mean_a", "ci95_a", "mean_b", "ci95_b", "p", "t", "d"]
        )
        for name, st in tests.items():
            writer.writerow(
                [
                    name,
                    repr(st.ci95_a[0]), repr(st.ci95_a[1]),
                    repr(st.ci95_b[0]), repr(st.ci95_b[1]),
                    repr(st.p), repr(st.t), repr(st.d),
                ]
            )
    finally:
        if own:
            fh.close()
