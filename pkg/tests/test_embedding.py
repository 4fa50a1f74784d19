import math

import pytest
from hypothesis import assume, given, strategies as st

from ehc.embedding import HashEmbedder, cosine_sim, embed, fnv1a_64, tokenize
from ehc.errors import UsageError

from oracles import argmax_first, scratch_cosine, scratch_embed, scratch_tokens

# Computed once with the scratch oracle in tests/oracles.py, then frozen.
GOLDEN_COUNT_THE_RED_CUBES = {28: -0.5, 116: -0.5, 124: 0.5, 233: 0.5}


def test_fnv1a_published_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_empty_text_is_zero_vector():
    v = embed("")
    assert len(v) == 256
    assert not any(v)


def test_punctuation_only_is_zero_vector():
    assert not any(embed("?!  ..."))


def test_lowercasing():
    assert embed("count") == embed("Count")


def test_golden_vector():
    v = embed("count the red cubes")
    nonzero = {i: x for i, x in enumerate(v) if x}
    assert nonzero == pytest.approx(GOLDEN_COUNT_THE_RED_CUBES, abs=1e-12)
    assert list(v) == scratch_embed("count the red cubes")


def test_tokenizer_splits_on_non_alphanumeric_runs():
    assert tokenize("Red-cube, BLUE_sphere!!  42x") == ["red", "cube", "blue", "sphere", "42x"]


@given(st.text(max_size=60))
def test_matches_scratch_oracle(text):
    assert tokenize(text) == scratch_tokens(text)
    assert list(embed(text)) == scratch_embed(text)


@given(st.text(max_size=60))
def test_unit_norm_or_zero(text):
    v = embed(text)
    norm = math.sqrt(sum(x * x for x in v))
    assert norm == 0.0 or abs(norm - 1.0) < 1e-12


@given(st.text(max_size=40))
def test_pure_function(text):
    assert embed(text) == embed(text)
    assert HashEmbedder(256).embed(text) == embed(text)


def test_other_dimensions():
    e = HashEmbedder(16)
    assert len(e.embed("some words here")) == 16
    assert list(e.embed("some words here")) == scratch_embed("some words here", 16)


def test_cosine_examples():
    assert cosine_sim([1, 0], [0, 1]) == 0.0
    # direct arithmetic: 1/sqrt(2); the 8-digit decimal 0.70710678 is 1.2e-9 short of it
    assert abs(cosine_sim([1, 1], [1, 0]) - 1 / math.sqrt(2)) <= 1e-9
    assert cosine_sim([1, 1], [1, 0]) == pytest.approx(0.70710678, abs=2e-9)
    assert cosine_sim([3, 4], [3, 4]) == pytest.approx(1.0, abs=1e-9)
    assert cosine_sim([0, 0], [1, 0]) == 0.0
    assert cosine_sim([1, 0], [-2, 0]) == -1.0


def test_cosine_dimension_mismatch():
    with pytest.raises(UsageError):
        cosine_sim([1, 0], [1, 0, 0])


vectors = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n),
        st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n),
    )
)


@given(vectors)
def test_cosine_symmetric_and_bounded(pair):
    a, b = pair
    s = cosine_sim(a, b)
    assert s == cosine_sim(b, a)
    assert -1.0 <= s <= 1.0
    assert s == scratch_cosine(a, b)


@given(st.lists(st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3), min_size=1, max_size=16))
def test_self_similarity(v):
    assert abs(cosine_sim(v, v) - 1.0) < 1e-9


@given(
    st.lists(st.lists(st.floats(-10, 10), min_size=4, max_size=4), min_size=2, max_size=6),
    st.lists(st.floats(-10, 10), min_size=4, max_size=4),
    st.floats(0.01, 100),
    st.data(),
)
def test_argmax_invariant_under_scaling(cands, query, scale, data):
    def scores(cs):
        return [cosine_sim(query, c) for c in cs]

    base = scores(cands)
    ranked = sorted(base, reverse=True)
    assume(ranked[0] - ranked[1] > 1e-9)
    j = data.draw(st.integers(0, len(cands) - 1))
    scaled = [list(c) for c in cands]
    scaled[j] = [x * scale for x in scaled[j]]
    assert argmax_first(scores(scaled)) == argmax_first(base)
