from __future__ import annotations

import numpy as np
import pytest

from activeforage.data import DataPoint, Dataset
from activeforage.relevance import Observation, ObservationSet
from activeforage.synth import make_clustered_dataset


def unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def make_instance(
    rng: np.random.Generator,
    n: int,
    dim: int = 6,
    labeled: int = 0,
    extent: float = 10.0,
    scattered_ids: bool = True,
) -> tuple[Dataset, ObservationSet]:
    """Random continuous instance: unit embeddings, uniform locations,
    random truth, and `labeled` random observations.

    Ids are non-contiguous to keep row/id confusion detectable.
    """
    if scattered_ids:
        ids = sorted(int(i) for i in rng.choice(n * 7 + 3, size=n, replace=False))
    else:
        ids = list(range(n))
    points = [
        DataPoint(
            id=ids[i],
            x=float(rng.uniform(0, extent)),
            y=float(rng.uniform(0, extent)),
            text="",
            tokens=(),
            embedding=unit_vector(rng, dim),
            truth=int(rng.integers(2)),
        )
        for i in range(n)
    ]
    ds = Dataset(points)
    D = ObservationSet()
    if labeled:
        chosen = rng.choice(n, size=labeled, replace=False)
        for i in chosen:
            D.upsert(Observation(points[i].id, int(rng.integers(2))))
    return ds, D


@pytest.fixture(scope="session")
def clustered_ds() -> Dataset:
    return make_clustered_dataset(n=600, incidence=0.1, seed=11)


@pytest.fixture(scope="session")
def bench_ds() -> Dataset:
    """The acceptance-benchmark dataset: 2000 points, 5% incidence,
    two spatial-and-embedding clusters, hashed embeddings."""
    return make_clustered_dataset(n=2000, incidence=0.05, clusters=2, seed=0)
