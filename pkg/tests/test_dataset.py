from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activeforage.data import (
    Dataset,
    apply_label_heuristic,
    attach_embeddings,
    load_dataset,
    sample_points,
    write_dataset,
)
from activeforage.errors import ConfigurationError, ParseError, ValidationError
from activeforage.synth import make_clustered_dataset
from activeforage.text import (
    HashedVectors,
    KeywordLexicon,
    embed_text,
    load_embedding_table,
    tokenize,
)

CSV_3 = "id,x,y,text\n1,0.0,1.0,hello world\n2,2.5,3.5,rainy day\n3,-1.0,0.5,sunny\n"


def test_load_csv_three_rows():
    ds = load_dataset(CSV_3, "csv")
    assert len(ds) == 3
    assert ds.ids == (1, 2, 3)
    assert ds.by_id(2).text == "rainy day"
    assert ds.incidence is None


def test_load_jsonl():
    src = '{"id": 5, "x": 1, "y": 2, "text": "abc", "truth": 1}\n{"id": 4, "x": 0, "y": 0, "text": "def"}\n'
    ds = load_dataset(src, "jsonl")
    assert ds.ids == (4, 5)  # sorted by id
    assert ds.by_id(5).truth == 1
    assert ds.by_id(4).truth is None


def test_duplicate_id_names_offender():
    src = "id,x,y,text\n7,0,0,a\n7,1,1,b\n"
    with pytest.raises(ValidationError, match="7"):
        load_dataset(src, "csv")


def test_parse_error_carries_line_number():
    src = "id,x,y,text\n1,0,0,a\nnotanint,1,1,b\n"
    with pytest.raises(ParseError, match="line 3"):
        load_dataset(src, "csv")
    with pytest.raises(ParseError, match="line 2"):
        load_dataset('{"id": 1, "x": 0, "y": 0, "text": "a"}\n{broken\n', "jsonl")


def test_missing_column_rejected():
    with pytest.raises(ParseError):
        load_dataset("id,x,text\n1,0,a\n", "csv")


def test_bad_truth_value():
    with pytest.raises(ParseError):
        load_dataset("id,x,y,text,truth\n1,0,0,a,2\n", "csv")


def test_nonfinite_location_rejected():
    with pytest.raises(ValidationError):
        load_dataset("id,x,y,text\n1,nan,0,a\n", "csv")


# -- tokenization -----------------------------------------------------------


def test_tokenize_normalization():
    toks = tokenize("The 12 grumpy Cats, don't cough!!")
    assert toks == ("grumpy", "cats", "cough")  # stops, numerals, punctuation gone


def test_tokenize_keeps_order_and_mixed_tokens():
    assert tokenize("flu2020 and flu") == ("flu2020", "flu")


# -- embeddings -------------------------------------------------------------


def test_embed_single_token_normalizes():
    out = embed_text(("a",), {"a": np.array([3.0, 4.0])})
    np.testing.assert_allclose(out, [0.6, 0.8], rtol=0, atol=1e-15)


def test_embed_cancellation_is_degenerate():
    table = {"a": np.array([1.0, 2.0]), "b": np.array([-1.0, -2.0])}
    out = embed_text(("a", "b"), table)
    assert not out.any()


def test_embed_two_tokens_diagonal():
    table = {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])}
    out = embed_text(("a", "b"), table)
    np.testing.assert_allclose(out, [1 / math.sqrt(2)] * 2, rtol=1e-12)


def test_embed_all_miss_is_zero():
    out = embed_text(("zz",), {"a": np.array([1.0, 0.0])})
    assert out.shape == (2,) and not out.any()


def test_embed_dim_mismatch():
    table = {"a": np.array([1.0, 0.0]), "b": np.array([1.0, 0.0, 0.0])}
    with pytest.raises(ConfigurationError):
        embed_text(("a", "b"), table)


def test_embedding_table_loader(tmp_path):
    path = tmp_path / "vecs.txt"
    path.write_text("cat 1.0 0.0\ndog 0.0 1.0\n")
    table = load_embedding_table(path)
    assert set(table) == {"cat", "dog"}
    with pytest.raises(ConfigurationError):
        load_embedding_table(io.StringIO("cat 1.0\ndog 0.0 1.0\n"))


def test_hashed_vectors_deterministic_units():
    a, b = HashedVectors(16), HashedVectors(16)
    np.testing.assert_array_equal(a["flu"], b["flu"])
    assert abs(np.linalg.norm(a["anything"]) - 1.0) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(alphabet="abcdefgh", min_size=1, max_size=6), max_size=8))
def test_embedding_norm_invariant(tokens):
    out = embed_text(tuple(tokens), HashedVectors(8))
    norm = np.linalg.norm(out)
    assert norm == 0.0 or abs(norm - 1.0) < 1e-9


def test_dataset_rejects_unnormalized_embedding():
    from activeforage.data import DataPoint

    with pytest.raises(ValidationError):
        Dataset([DataPoint(1, 0, 0, "", (), np.array([1.0, 1.0]))])


# -- labeling heuristic -----------------------------------------------------


def test_heuristic_matches_phrase():
    ds = load_dataset(
        "id,x,y,text\n1,0,0,my sore throat is awful\n2,0,0,lovely weather today\n",
        "csv",
    )
    lex = KeywordLexicon.default()
    labeled = apply_label_heuristic(ds, lex)
    assert labeled.by_id(1).truth == 1
    assert labeled.by_id(2).truth == 0
    assert labeled.incidence == 0.5


def test_heuristic_phrase_must_be_contiguous():
    ds = load_dataset("id,x,y,text\n1,0,0,sore feet and a throat lozenge\n", "csv")
    lex = KeywordLexicon.from_phrases(["sore throat"])
    assert apply_label_heuristic(ds, lex).by_id(1).truth == 0


def test_heuristic_spans_removed_stopwords():
    # "short of breath" -> tokens (short, breath); text with "of" still matches
    ds = load_dataset("id,x,y,text\n1,0,0,I am short of breath now\n", "csv")
    lex = KeywordLexicon.from_phrases(["short of breath"])
    assert apply_label_heuristic(ds, lex).by_id(1).truth == 1


def test_heuristic_idempotent(clustered_ds):
    lex = KeywordLexicon.default()
    once = apply_label_heuristic(clustered_ds, lex)
    twice = apply_label_heuristic(once, lex)
    assert [p.truth for p in once] == [p.truth for p in twice]


def test_heuristic_reproduces_synthetic_truth(clustered_ds):
    relabeled = apply_label_heuristic(clustered_ds, KeywordLexicon.default())
    assert [p.truth for p in relabeled] == [p.truth for p in clustered_ds]


def test_empty_lexicon_rejected():
    with pytest.raises(ConfigurationError):
        KeywordLexicon.from_phrases([])
    with pytest.raises(ConfigurationError):
        KeywordLexicon.from_phrases(["the", "of"])  # all stop words


def test_lexicon_matched_reports_phrases():
    lex = KeywordLexicon.from_phrases(["sore throat", "fever"])
    toks = tokenize("fever and a sore throat")
    assert lex.matched(toks) == {"sore throat", "fever"}


# -- sampling ---------------------------------------------------------------


def test_sample_full_is_identity(clustered_ds):
    out = sample_points(clustered_ds, len(clustered_ds), seed=3)
    assert out.ids == clustered_ds.ids


def test_sample_deterministic(clustered_ds):
    a = sample_points(clustered_ds, 50, seed=9)
    b = sample_points(clustered_ds, 50, seed=9)
    assert a.ids == b.ids
    c = sample_points(clustered_ds, 50, seed=10)
    assert a.ids != c.ids


def test_sample_out_of_range(clustered_ds):
    with pytest.raises(ValueError):
        sample_points(clustered_ds, len(clustered_ds) + 1, seed=0)


def test_sample_incidence_concentrates():
    parent = make_clustered_dataset(n=12000, incidence=1 / 3, seed=5)
    for seed in range(5):
        sub = sample_points(parent, 3000, seed=seed)
        assert abs(sub.incidence - parent.incidence) <= 0.03


# -- round trip -------------------------------------------------------------


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_write_load_round_trip(tmp_path, fmt):
    ds = make_clustered_dataset(n=40, incidence=0.2, seed=8)
    path = tmp_path / f"out.{fmt}"
    write_dataset(ds, path, fmt)
    back = load_dataset(path, fmt)
    assert back.ids == ds.ids
    assert [p.truth for p in back] == [p.truth for p in ds]
    assert [p.text for p in back] == [p.text for p in ds]
    assert back.by_id(ds.ids[0]).x == ds.by_id(ds.ids[0]).x


def test_attach_embeddings_flags_degenerate():
    ds = load_dataset("id,x,y,text\n1,0,0,éé\n2,0,0,flu season\n", "csv")
    ds = attach_embeddings(ds, {"flu": np.array([1.0, 0.0]), "season": np.array([0.0, 1.0])})
    assert ds.by_id(1).degenerate  # no tokens hit the table
    assert not ds.by_id(2).degenerate
