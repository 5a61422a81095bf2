"""Posterior relevance of unlabeled points given oracle feedback.

Each attribute (text, location) carries a smoothed k-NN classifier over
the *labeled* points: with n+ positives among the min(k, |D|) nearest
labeled neighbors, the posterior is (gamma*pi + n+) / (gamma + |N|).
The two attribute posteriors are fused by a convex weight q fit by
maximum likelihood on leave-one-out predictions of the labeled set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import DataPoint, Dataset
from .engine import FUSION_GRID, SearchState, fit_q_grid, smoothed_prob
from .errors import ConfigurationError, DegenerateEmbeddingWarning, ValidationError

__all__ = [
    "Observation",
    "ObservationSet",
    "AttributeModel",
    "RelevanceModel",
    "knn_probability",
    "fused_probability",
    "fit_fusion_weight",
    "rank_unlabeled",
    "FUSION_GRID",
]

_SOURCES = ("bookmark", "irrelevant_flag", "oracle")


@dataclass(frozen=True)
class Observation:
    """One labeled point: id, binary label, and how the label arose."""

    point_id: int
    label: int
    source: str = "oracle"
    at: int = 0

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label!r}")
        if self.source not in _SOURCES:
            raise ValidationError(f"unknown observation source {self.source!r}")


class ObservationSet:
    """The labeled set D; at most one observation per point (latest wins)."""

    def __init__(self, entries=()):
        self._by_id: dict[int, Observation] = {}
        for obs in entries:
            self.upsert(obs)

    def upsert(self, obs: Observation) -> None:
        self._by_id[obs.point_id] = obs

    def remove(self, point_id: int) -> bool:
        return self._by_id.pop(point_id, None) is not None

    def get(self, point_id: int) -> Observation | None:
        return self._by_id.get(point_id)

    def __contains__(self, point_id: int) -> bool:
        return point_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self):
        return iter(self._by_id.values())

    @property
    def entries(self) -> tuple[Observation, ...]:
        return tuple(self._by_id.values())

    def positives(self) -> int:
        return sum(o.label for o in self._by_id.values())

    def copy(self) -> "ObservationSet":
        return ObservationSet(self.entries)


_ATTR_METRIC = {"text": "cosine", "location": "euclidean"}


@dataclass(frozen=True)
class AttributeModel:
    """Smoothed k-NN classifier over one attribute."""

    attribute: str
    k: int = 50
    gamma: float = 1.0
    pi: float = 0.05
    metric: str = field(default="")

    def __post_init__(self):
        if self.attribute not in _ATTR_METRIC:
            raise ConfigurationError(f"unknown attribute {self.attribute!r}")
        expected = _ATTR_METRIC[self.attribute]
        if not self.metric:
            object.__setattr__(self, "metric", expected)
        elif self.metric != expected:
            raise ConfigurationError(
                f"{self.attribute} model requires the {expected} metric"
            )
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if not self.gamma > 0:
            raise ConfigurationError("gamma must be > 0")
        if not 0.0 < self.pi <= 1.0:
            raise ConfigurationError("pi must lie in (0, 1]")


@dataclass
class RelevanceModel:
    """Text and location attribute models fused by weight q (on text)."""

    text: AttributeModel = field(default_factory=lambda: AttributeModel("text"))
    location: AttributeModel = field(
        default_factory=lambda: AttributeModel("location")
    )
    q: float = 0.5

    def __post_init__(self):
        if self.text.attribute != "text" or self.location.attribute != "location":
            raise ConfigurationError("models must be (text, location)")
        if not 0.0 <= self.q <= 1.0:
            raise ConfigurationError("q must lie in [0, 1]")


def _labeled_arrays(D: ObservationSet, ds: Dataset):
    """(rows, labels) for the labeled set, ascending point id."""
    from .engine import DatasetIndex

    index = DatasetIndex.of(ds)
    pairs = []
    for obs in D:
        row = index.row_of.get(obs.point_id)
        if row is None:
            raise ValidationError(f"observation for unknown point id {obs.point_id}")
        pairs.append((row, obs.label))
    pairs.sort()
    rows = np.asarray([p[0] for p in pairs], dtype=np.int64)
    labels = np.asarray([p[1] for p in pairs], dtype=np.int64)
    return index, rows, labels


def knn_probability(
    model: AttributeModel, x: DataPoint, D: ObservationSet, ds: Dataset
) -> float:
    """Posterior that x is relevant under one attribute model.

    Uses the min(k, |D|) nearest labeled points; distance ties break
    toward the smaller point id. Returns the prior pi exactly when D is
    empty, and falls back to pi (with a warning) when a text query has
    a degenerate embedding.
    """
    if x.id in D:
        raise ValidationError(f"point {x.id} is already labeled")
    if len(D) == 0:
        return model.pi
    index, rows, labels = _labeled_arrays(D, ds)
    if model.attribute == "text":
        if x.embedding is None:
            raise ConfigurationError(f"point {x.id} has no embedding")
        if x.degenerate:
            warnings.warn(
                f"degenerate embedding on point {x.id}; using prior {model.pi}",
                DegenerateEmbeddingWarning,
                stacklevel=2,
            )
            return model.pi
        dists = 1.0 - index.emb[rows] @ np.asarray(x.embedding, dtype=np.float64)
    else:
        diff = index.xy[rows] - np.asarray([x.x, x.y], dtype=np.float64)
        dists = np.einsum("ij,ij->i", diff, diff)
    kk = min(model.k, rows.size)
    order = np.argsort(dists, kind="stable")[:kk]
    npos = int(labels[order].sum())
    return smoothed_prob(model.gamma, model.pi, npos, kk)


def fused_probability(
    rm: RelevanceModel, x: DataPoint, D: ObservationSet, ds: Dataset
) -> float:
    """Convex fusion q*P_text + (1-q)*P_location for one point."""
    pt = knn_probability(rm.text, x, D, ds)
    pl = knn_probability(rm.location, x, D, ds)
    return rm.q * pt + (1.0 - rm.q) * pl


def fit_fusion_weight(rm: RelevanceModel, D: ObservationSet, ds: Dataset) -> float:
    """Maximum-likelihood fusion weight over the grid {0, 0.01, ..., 1}.

    Maximizes the log-likelihood of the observed labels under fused
    leave-one-out predictions (each point's own observation excluded);
    ties break toward the smallest q. An empty D yields the uninformed
    default 0.5.
    """
    if len(D) == 0:
        return 0.5
    state = SearchState.from_observations(rm, D, ds)
    pred_t, pred_l = state.loo_attr_preds()
    q, _ = fit_q_grid(pred_t, pred_l, state.lab_labels)
    return q


def rank_unlabeled(
    rm: RelevanceModel, D: ObservationSet, ds: Dataset
) -> list[tuple[int, float]]:
    """All unlabeled points with fused posteriors, best first.

    Sorted by probability descending, ties by ascending id.
    """
    state = SearchState.from_observations(rm, D, ds)
    probs = state.fused_pool_probs()
    ids = state.pool_ids()
    order = np.lexsort((ids, -probs))
    return [(int(ids[i]), float(probs[i])) for i in order]
