"""Point collections: loading, validation, heuristic labels, sampling.

Datasets are immutable after construction; operations that change
labels return a new Dataset sharing unchanged point objects.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ParseError, ValidationError
from .text import KeywordLexicon, embed_text, tokenize

EMBEDDING_NORM_TOL = 1e-9


@dataclass(frozen=True)
class DataPoint:
    """One visualizable item: map position, text, and optional label."""

    id: int
    x: float
    y: float
    text: str
    tokens: tuple[str, ...] = ()
    embedding: np.ndarray | None = None
    truth: int | None = None

    @property
    def degenerate(self) -> bool:
        """True when an embedding is present but is the zero vector."""
        return self.embedding is not None and not np.any(self.embedding)


class Dataset:
    """An immutable, id-sorted collection of points.

    ``incidence`` is the fraction of truth=1 points among those that
    carry a truth label (None when no point is labeled).
    """

    __slots__ = ("points", "incidence", "_by_id", "_index")

    def __init__(self, points: Sequence[DataPoint]):
        pts = sorted(points, key=lambda p: p.id)
        by_id: dict[int, DataPoint] = {}
        for p in pts:
            if p.id in by_id:
                raise ValidationError(f"duplicate point id {p.id}")
            if not (np.isfinite(p.x) and np.isfinite(p.y)):
                raise ValidationError(f"point {p.id}: non-finite location")
            if p.truth not in (None, 0, 1):
                raise ValidationError(f"point {p.id}: truth must be 0 or 1")
            if p.embedding is not None and np.any(p.embedding):
                norm = float(np.linalg.norm(p.embedding))
                if abs(norm - 1.0) > EMBEDDING_NORM_TOL:
                    raise ValidationError(
                        f"point {p.id}: embedding norm {norm} is not 1"
                    )
            by_id[p.id] = p
        self.points = tuple(pts)
        self._by_id = by_id
        self._index = None
        labeled = [p.truth for p in pts if p.truth is not None]
        self.incidence = (sum(labeled) / len(labeled)) if labeled else None

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, point_id: int) -> bool:
        return point_id in self._by_id

    def by_id(self, point_id: int) -> DataPoint:
        try:
            return self._by_id[point_id]
        except KeyError:
            raise KeyError(f"no point with id {point_id}") from None

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.points)

    @property
    def has_truth(self) -> bool:
        return all(p.truth is not None for p in self.points)

    @property
    def has_embeddings(self) -> bool:
        return all(p.embedding is not None for p in self.points)

    def truth_map(self) -> dict[int, int]:
        return {p.id: p.truth for p in self.points if p.truth is not None}


def _coerce_lines(source: str | Path | bytes | IO) -> Iterable[str]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, (str, Path)) and Path(source).exists():
        return Path(source).read_text(encoding="utf-8").splitlines(keepends=True)
    if isinstance(source, str):
        return io.StringIO(source)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    raise TypeError(f"unsupported dataset source: {type(source)!r}")


def _parse_truth(raw, line: int) -> int | None:
    if raw is None or raw == "":
        return None
    try:
        val = int(raw)
    except (TypeError, ValueError):
        raise ParseError(f"truth value {raw!r} is not 0/1", line)
    if val not in (0, 1):
        raise ParseError(f"truth value {val} is not 0/1", line)
    return val


def _point_from_record(rec: Mapping, line: int) -> DataPoint:
    for field in ("id", "x", "y", "text"):
        if field not in rec or rec[field] is None or rec[field] == "":
            raise ParseError(f"missing required field {field!r}", line)
    try:
        pid = int(rec["id"])
    except (TypeError, ValueError):
        raise ParseError(f"id {rec['id']!r} is not an integer", line)
    try:
        x = float(rec["x"])
        y = float(rec["y"])
    except (TypeError, ValueError):
        raise ParseError("coordinates are not numeric", line)
    text = str(rec["text"])
    return DataPoint(
        id=pid,
        x=x,
        y=y,
        text=text,
        tokens=tokenize(text),
        truth=_parse_truth(rec.get("truth"), line),
    )


def load_dataset(
    source: str | Path | bytes | IO,
    format: str = "csv",
    table: Mapping[str, np.ndarray] | None = None,
) -> Dataset:
    """Load a dataset from CSV (id,x,y,text[,truth]) or JSONL records.

    When an embedding table is supplied, point embeddings are computed
    at load time; otherwise they stay unset until attach_embeddings.
    """
    lines = _coerce_lines(source)
    points: list[DataPoint] = []
    if format == "csv":
        reader = csv.DictReader(lines)
        if reader.fieldnames is None:
            raise ParseError("empty csv input", 1)
        missing = {"id", "x", "y", "text"} - set(reader.fieldnames)
        if missing:
            raise ParseError(f"missing columns: {sorted(missing)}", 1)
        for rec in reader:
            points.append(_point_from_record(rec, reader.line_num))
    elif format == "jsonl":
        for lineno, raw in enumerate(lines, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid json ({exc.msg})", lineno) from exc
            if not isinstance(rec, dict):
                raise ParseError("record is not an object", lineno)
            points.append(_point_from_record(rec, lineno))
    else:
        raise ConfigurationError(f"unknown dataset format {format!r}")
    ds = Dataset(points)
    if table is not None:
        ds = attach_embeddings(ds, table)
    return ds


def attach_embeddings(ds: Dataset, table: Mapping[str, np.ndarray]) -> Dataset:
    """Compute every point's embedding from the table; returns a new Dataset."""
    return Dataset(
        [replace(p, embedding=embed_text(p.tokens, table)) for p in ds]
    )


def apply_label_heuristic(ds: Dataset, lexicon: KeywordLexicon) -> Dataset:
    """Set truth=1 on points containing any lexicon phrase, 0 otherwise."""
    if not isinstance(lexicon, KeywordLexicon):
        raise ConfigurationError("a KeywordLexicon is required")
    return Dataset(
        [replace(p, truth=1 if lexicon.matches(p.tokens) else 0) for p in ds]
    )


def sample_points(ds: Dataset, n: int, seed: int) -> Dataset:
    """Uniform sample of n points without replacement, deterministic in seed."""
    if n < 0 or n > len(ds):
        raise ValueError(f"sample size {n} out of range for {len(ds)} points")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(ds), size=n, replace=False)
    return Dataset([ds.points[i] for i in sorted(chosen)])


def write_dataset(ds: Dataset, dest: str | Path | IO[str], format: str = "csv") -> None:
    """Write points back out as CSV or JSONL, including truth when present."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        if format == "csv":
            writer = csv.writer(fh)
            writer.writerow(["id", "x", "y", "text", "truth"])
            for p in ds:
                writer.writerow(
                    [p.id, repr(p.x), repr(p.y), p.text, "" if p.truth is None else p.truth]
                )
        elif format == "jsonl":
            for p in ds:
                rec = {"id": p.id, "x": p.x, "y": p.y, "text": p.text}
                if p.truth is not None:
                    rec["truth"] = p.truth
                fh.write(json.dumps(rec) + "\n")
        else:
            raise ConfigurationError(f"unknown dataset format {format!r}")
    finally:
        if own:
            fh.close()
