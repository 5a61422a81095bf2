"""Tokenization, keyword lexicons, and text embeddings.

Tokens are lowercase alphanumeric runs with punctuation, standalone
numerals, and stop words removed. A point's text embedding is the
normalized average of its tokens' word vectors; a token list whose
vectors all miss (or an empty token list) yields the zero vector, which
downstream models treat as degenerate.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import ConfigurationError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _read_list_file(src: str | Path | IO[str]) -> list[str]:
    if hasattr(src, "read"):
        lines = src.read().splitlines()
    else:
        lines = Path(src).read_text(encoding="utf-8").splitlines()
    out = []
    for raw in lines:
        entry = raw.strip()
        if entry and not entry.startswith("#"):
            out.append(entry)
    return out


def _default_asset(name: str) -> list[str]:
    ref = resources.files("activeforage").joinpath("assets", name)
    return _read_list_file(ref.open("r", encoding="utf-8"))


_stopwords_cache: frozenset[str] | None = None


def default_stopwords() -> frozenset[str]:
    """Stop words shipped with the package (loaded once)."""
    global _stopwords_cache
    if _stopwords_cache is None:
        _stopwords_cache = frozenset(_default_asset("stopwords.txt"))
    return _stopwords_cache


def load_stopwords(src: str | Path | IO[str]) -> frozenset[str]:
    return frozenset(w.lower() for w in _read_list_file(src))


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> tuple[str, ...]:
    """Normalize raw text to the token sequence used by every model.

    Lowercases, splits on non-word characters, drops purely numeric
    tokens and stop words. Order of surviving tokens is preserved.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    toks = _TOKEN_RE.findall(text.lower())
    return tuple(t for t in toks if not t.isdigit() and t not in stopwords)


@dataclass(frozen=True)
class KeywordLexicon:
    """A set of token-normalized phrases used for heuristic labeling.

    Each phrase matches when its tokens occur as a contiguous
    subsequence of a point's token list.
    """

    phrases: tuple[str, ...]
    phrase_tokens: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.phrases:
            raise ConfigurationError("lexicon is empty")

    @classmethod
    def from_phrases(
        cls, phrases: Iterable[str], stopwords: frozenset[str] | None = None
    ) -> "KeywordLexicon":
        kept: list[str] = []
        toks: list[tuple[str, ...]] = []
        for phrase in phrases:
            tt = tokenize(phrase, stopwords)
            if tt:
                kept.append(phrase.strip().lower())
                toks.append(tt)
        if not kept:
            raise ConfigurationError("lexicon is empty after token normalization")
        return cls(tuple(kept), tuple(toks))

    @classmethod
    def from_file(cls, src: str | Path | IO[str]) -> "KeywordLexicon":
        return cls.from_phrases(_read_list_file(src))

    @classmethod
    def default(cls) -> "KeywordLexicon":
        return cls.from_phrases(_default_asset("keywords.txt"))

    def matched(self, tokens: tuple[str, ...]) -> set[str]:
        """Phrases occurring contiguously in ``tokens``."""
        hits: set[str] = set()
        for phrase, pt in zip(self.phrases, self.phrase_tokens):
            w = len(pt)
            if w > len(tokens):
                continue
            for start in range(len(tokens) - w + 1):
                if tokens[start : start + w] == pt:
                    hits.add(phrase)
                    break
        return hits

    def matches(self, tokens: tuple[str, ...]) -> bool:
        for phrase, pt in zip(self.phrases, self.phrase_tokens):
            w = len(pt)
            for start in range(len(tokens) - w + 1):
                if tokens[start : start + w] == pt:
                    return True
        return False


def load_embedding_table(src: str | Path | IO[str]) -> dict[str, np.ndarray]:
    """Read a whitespace-separated term-vector table (term, then d floats).

    All rows must share one dimensionality.
    """
    if hasattr(src, "read"):
        lines = src.read().splitlines()
    else:
        lines = Path(src).read_text(encoding="utf-8").splitlines()
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    for i, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) < 2:
            raise ConfigurationError(f"embedding table line {i}: no vector components")
        term = parts[0]
        try:
            vec = np.asarray([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise ConfigurationError(f"embedding table line {i}: {exc}") from exc
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ConfigurationError(
                f"embedding table line {i}: dimension {vec.size} != {dim}"
            )
        table[term] = vec
    if not table:
        raise ConfigurationError("embedding table is empty")
    return table


class HashedVectors(Mapping[str, np.ndarray]):
    """Deterministic pseudo word vectors derived from a term hash.

    Stand-in for a pretrained table so pipelines and tests run without
    external vector files. Every term maps to a fixed unit vector.
    """

    def __init__(self, dim: int = 32):
        if dim < 1:
            raise ConfigurationError("embedding dimension must be >= 1")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def __getitem__(self, term: str) -> np.ndarray:
        vec = self._cache.get(term)
        if vec is None:
            digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._cache[term] = vec
        return vec

    def __contains__(self, term: object) -> bool:
        return isinstance(term, str)

    def __iter__(self):
        return iter(self._cache)

    def __len__(self) -> int:
        return len(self._cache)


def embed_text(
    tokens: Iterable[str], table: Mapping[str, np.ndarray]
) -> np.ndarray:
    """Unit-normalized sum of the table vectors of the tokens found.

    Tokens missing from the table are skipped. Returns the zero vector
    (degenerate) when nothing is found or the sum cancels.
    """
    dim: int | None = getattr(table, "dim", None)
    total: np.ndarray | None = None
    for tok in tokens:
        if tok not in table:
            continue
        vec = table[tok]
        if total is None:
            total = np.asarray(vec, dtype=np.float64).copy()
            dim = total.size
        else:
            if vec.size != dim:
                raise ConfigurationError(
                    f"embedding dimension mismatch: {vec.size} != {dim}"
                )
            total += vec
    if total is None:
        if dim is None:
            first = next(iter(table.values()), None)
            dim = first.size if first is not None else 0
        return np.zeros(dim, dtype=np.float64)
    norm = np.linalg.norm(total)
    if norm == 0.0:
        return np.zeros(dim, dtype=np.float64)
    return total / norm
