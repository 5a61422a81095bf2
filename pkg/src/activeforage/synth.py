"""Synthetic clustered datasets for benchmarks, demos, and tests.

Relevant points sit in a configurable number of spatial blobs and share
small per-cluster symptom vocabularies (so hashed embeddings cluster
too); irrelevant points are spatially uniform with mundane texts. The
symptom words come from the default keyword lexicon, so heuristic
labeling reproduces the generated truth.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .data import DataPoint, Dataset, attach_embeddings, write_dataset
from .text import HashedVectors, tokenize

# Clusters share two anchor words so their embedding neighborhoods are
# related; policies can then bridge from one found cluster to the next.
CLUSTER_VOCABS = (
    ("fever", "cough", "chills", "flu"),
    ("fever", "cough", "headache", "nausea"),
    ("fever", "cough", "diarrhea", "vomiting"),
)

_MUNDANE = (
    "coffee breakfast lunch dinner pizza burger salad bakery "
    "traffic commute subway highway parking bridge downtown river "
    "game match score team stadium concert band guitar movie theater "
    "sunshine clouds rain breeze garden park bench picnic "
    "meeting deadline office printer email laptop keyboard "
    "weekend holiday birthday party friends family neighbors dog cat "
    "shopping market bargain shoes jacket umbrella library book novel"
).split()


def make_clustered_dataset(
    n: int = 2000,
    incidence: float = 0.05,
    clusters: int = 2,
    seed: int = 0,
    dim: int = 32,
    extent: float = 100.0,
    cluster_sigma: float = 3.0,
) -> Dataset:
    """Generate a labeled dataset with clustered relevant points and
    deterministic hashed embeddings attached."""
    if not 0.0 < incidence < 1.0:
        raise ValueError("incidence must lie in (0, 1)")
    if not 1 <= clusters <= len(CLUSTER_VOCABS):
        raise ValueError(f"clusters must lie in 1..{len(CLUSTER_VOCABS)}")
    rng = np.random.default_rng(seed)
    n_pos = max(clusters, int(round(n * incidence)))
    n_neg = n - n_pos
    centers = np.column_stack(
        [
            np.linspace(0.25 * extent, 0.75 * extent, clusters),
            np.linspace(0.25 * extent, 0.75 * extent, clusters),
        ]
    )
    records: list[tuple[float, float, str, int]] = []
    for i in range(n_pos):
        c = i % clusters
        x, y = rng.normal(centers[c], cluster_sigma)
        vocab = CLUSTER_VOCABS[c]
        words = list(rng.choice(vocab, size=3))
        words.append(str(rng.choice(_MUNDANE)))
        rng.shuffle(words)
        records.append((float(x), float(y), " ".join(words), 1))
    for _ in range(n_neg):
        x, y = rng.uniform(0.0, extent, size=2)
        words = rng.choice(_MUNDANE, size=int(rng.integers(4, 8)))
        records.append((float(x), float(y), " ".join(words), 0))
    order = rng.permutation(len(records))
    points = [
        DataPoint(
            id=i,
            x=records[j][0],
            y=records[j][1],
            text=records[j][2],
            tokens=tokenize(records[j][2]),
            truth=records[j][3],
        )
        for i, j in enumerate(order)
    ]
    return attach_embeddings(Dataset(points), HashedVectors(dim))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m activeforage.synth",
        description="Write a synthetic clustered dataset to a file.",
    )
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--incidence", type=float, default=0.05)
    parser.add_argument("--clusters", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    ds = make_clustered_dataset(
        n=args.n, incidence=args.incidence, clusters=args.clusters, seed=args.seed
    )
    write_dataset(ds, args.out, args.format)
    print(f"wrote {len(ds)} points ({ds.incidence:.1%} relevant) to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
