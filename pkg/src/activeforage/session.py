"""Interactive sessions: UI events become labels, labels move the
suggestion batch.

A session holds the labeled set built from bookmark/flag events and a
live batch of suggested points (empty until the first bookmark). After
every label-changing event the fusion weight is refit and the batch is
recomputed from the session's policy; replaying a session's event log
against the same dataset reproduces the exact state trajectory.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset
from .engine import SearchState
from .errors import ConfigurationError, ProtocolError, ValidationError
from .policies import PolicySpec, _rng_for
from .relevance import Observation, ObservationSet, RelevanceModel

EVENT_KINDS = (
    "hover_start",
    "hover_end",
    "bookmark_add",
    "bookmark_remove",
    "irrelevant_flag",
    "session_end",
)
LABEL_EVENTS = ("bookmark_add", "bookmark_remove", "irrelevant_flag")

DEFAULT_BATCH_SIZE = 10
DEFAULT_BUDGET_MS = 600_000


@dataclass(frozen=True)
class InteractionEvent:
    """A timestamped UI event; ``at`` is ms since session start."""

    kind: str
    point_id: int | None = None
    at: int = 0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.kind == "session_end":
            if self.point_id is not None:
                raise ValidationError("session_end carries no point id")
        elif self.point_id is None:
            raise ValidationError(f"{self.kind} requires a point id")
        if self.at < 0:
            raise ValidationError("timestamps must be >= 0")


class Session:
    """One oracle's labeling session over a dataset."""

    def __init__(
        self,
        ds: Dataset,
        policy: PolicySpec,
        batch_size: int = DEFAULT_BATCH_SIZE,
        budget_ms: int = DEFAULT_BUDGET_MS,
        session_id: str | None = None,
        dataset_ref: str = "",
        rm: RelevanceModel | None = None,
        strict_refresh: bool = False,
    ):
        if batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if budget_ms < 1:
            raise ConfigurationError("budget_ms must be >= 1")
        self.id = session_id or uuid.uuid4().hex
        self.ds = ds
        self.dataset_ref = dataset_ref
        self.policy = policy
        self.batch_size = batch_size
        self.budget_ms = budget_ms
        self.strict_refresh = strict_refresh
        self.rm = rm if rm is not None else RelevanceModel()
        self.D = ObservationSet()
        self.log: list[InteractionEvent] = []
        self._snapshots: list[tuple[float, tuple[int, ...]]] = []
        self._suggestions: list[tuple[int, float]] = []
        self._cold = True
        self._closed = False

    # -- reads ---------------------------------------------------------

    def suggestions(self) -> list[tuple[int, float]]:
        """The stored batch with its scores at last refresh; best first."""
        return list(self._suggestions)

    def suggestion_ids(self) -> tuple[int, ...]:
        return tuple(pid for pid, _ in self._suggestions)

    def utility(self) -> int:
        """Number of relevant discoveries: net bookmarks in D."""
        return self.D.positives()

    @property
    def closed(self) -> bool:
        return self._closed

    # -- event handling --------------------------------------------------

    def apply_event(self, event: InteractionEvent) -> "Session":
        """Validate and apply one event; label events refresh the model."""
        if self._closed:
            raise ProtocolError("session has ended")
        if self.log and event.at < self.log[-1].at:
            raise ProtocolError(
                f"out-of-order timestamp {event.at} after {self.log[-1].at}"
            )
        if event.kind == "session_end":
            self._closed = True
        else:
            if event.point_id not in self.ds:
                raise ProtocolError(f"unknown point id {event.point_id}")
            if event.kind in LABEL_EVENTS:
                if event.at > self.budget_ms:
                    raise ProtocolError("session budget expired")
                self._apply_label_event(event)
        self.log.append(event)
        self._snapshots.append((self.rm.q, self.suggestion_ids()))
        return self

    def _apply_label_event(self, event: InteractionEvent) -> None:
        pid = event.point_id
        if event.kind == "bookmark_add":
            self.D.upsert(Observation(pid, 1, source="bookmark", at=event.at))
            self._cold = False
        elif event.kind == "bookmark_remove":
            existing = self.D.get(pid)
            if existing is None or existing.label != 1:
                raise ProtocolError(f"point {pid} is not bookmarked")
            self.D.remove(pid)
        else:  # irrelevant_flag
            if pid not in self.suggestion_ids():
                raise ProtocolError(
                    f"point {pid} is not a current suggestion"
                )
            self.D.upsert(
                Observation(pid, 0, source="irrelevant_flag", at=event.at)
            )
        if self.policy.kind == "none":
            return
        state = SearchState.from_observations(self.rm, self.D, self.ds)
        state.refit_q()
        if self.strict_refresh and event.kind != "bookmark_add":
            # strict mode: the batch only moves on bookmarks, but
            # freshly labeled points still drop out of it
            self._suggestions = [
                (p, s) for p, s in self._suggestions if p not in self.D
            ]
            return
        self._refresh_suggestions(state)

    def _refresh_suggestions(self, state: SearchState) -> None:
        if self._cold:
            self._suggestions = []
            return
        pool_ids = state.pool_ids()
        size = min(self.batch_size, pool_ids.size)
        if size == 0:
            self._suggestions = []
            return
        kind = self.policy.kind
        if kind == "random":
            rng = _rng_for(
                self.policy.seed if self.policy.seed is not None else 0,
                len(self.log),
            )
            chosen = rng.choice(pool_ids.size, size=size, replace=False)
            probs = state.fused_pool_probs()[chosen]
            ids = pool_ids[chosen]
        elif kind == "one_step" or (kind == "ell_step" and self.policy.ell == 1):
            probs = state.fused_pool_probs()
            ids = pool_ids
        else:
            budget = self.policy.budget if kind == "ens" else self.policy.ell
            base = state.fused_pool_probs()
            cap = min(self.policy.candidate_cap, pool_ids.size)
            cand = np.lexsort((pool_ids, -base))[:cap].astype(np.int64)
            probs = state.ens_scores_at(cand, budget)
            ids = pool_ids[cand]
        order = np.lexsort((ids, -probs))[:size]
        self._suggestions = [(int(ids[i]), float(probs[i])) for i in order]

    # -- export / replay ---------------------------------------------------

    def export_header(self) -> dict:
        return {
            "record": "session",
            "session_id": self.id,
            "dataset_ref": self.dataset_ref,
            "policy": self.policy.to_dict(),
            "batch_size": self.batch_size,
            "budget_ms": self.budget_ms,
            "strict_refresh": self.strict_refresh,
        }

    def export_lines(self) -> list[str]:
        """Line-delimited session export: header, then one record per
        event with the post-event model snapshot (q, suggestion ids)."""
        lines = [json.dumps(self.export_header())]
        for seq, (event, (q, sugg)) in enumerate(zip(self.log, self._snapshots)):
            lines.append(
                json.dumps(
                    {
                        "record": "event",
                        "seq": seq,
                        "kind": event.kind,
                        "point_id": event.point_id,
                        "at": event.at,
                        "q": q,
                        "suggestions": list(sugg),
                    }
                )
            )
        return lines

    @classmethod
    def replay(
        cls,
        ds: Dataset,
        events: Iterable[InteractionEvent],
        policy: PolicySpec,
        batch_size: int = DEFAULT_BATCH_SIZE,
        budget_ms: int = DEFAULT_BUDGET_MS,
        **kwargs,
    ) -> "Session":
        """Rebuild a session by applying an event log in order."""
        session = cls(ds, policy, batch_size, budget_ms, **kwargs)
        for event in events:
            session.apply_event(event)
        return session


def create_session(
    ds: Dataset,
    policy: PolicySpec,
    batch_size: int = DEFAULT_BATCH_SIZE,
    budget_ms: int = DEFAULT_BUDGET_MS,
    **kwargs,
) -> Session:
    """Start a fresh session: empty labels, empty suggestions, empty log."""
    return Session(ds, policy, batch_size, budget_ms, **kwargs)
