"""Active-search data foraging.

A human (or simulated) oracle explores a dot map of a dataset; bookmark
and flag interactions train a fused k-NN relevance model; query
policies keep surfacing the most promising unlabeled points. Includes a
policy simulation bench, session analytics, a REST service, and a CLI.
"""

from .data import DataPoint, Dataset, apply_label_heuristic, load_dataset, sample_points
from .policies import PolicySpec
from .relevance import (
    AttributeModel,
    Observation,
    ObservationSet,
    RelevanceModel,
    fit_fusion_weight,
    fused_probability,
    knn_probability,
    rank_unlabeled,
)
from .session import InteractionEvent, Session, create_session
from .simulate import SimulationConfig, cross_validate, run_benchmark, run_simulation
from .text import HashedVectors, KeywordLexicon, embed_text, tokenize

__version__ = "0.1.0"

__all__ = [
    "AttributeModel",
    "DataPoint",
    "Dataset",
    "HashedVectors",
    "InteractionEvent",
    "KeywordLexicon",
    "Observation",
    "ObservationSet",
    "PolicySpec",
    "RelevanceModel",
    "Session",
    "SimulationConfig",
    "apply_label_heuristic",
    "create_session",
    "cross_validate",
    "embed_text",
    "fit_fusion_weight",
    "fused_probability",
    "knn_probability",
    "load_dataset",
    "rank_unlabeled",
    "run_benchmark",
    "run_simulation",
    "sample_points",
    "tokenize",
]
