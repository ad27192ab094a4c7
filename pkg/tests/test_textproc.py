from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sumlab import textproc
from sumlab.textproc import (
    EmptyText,
    count_syllables,
    load_familiar_words,
    ngrams,
    readability_stats,
    split_sentences,
    tokenize,
)

texts = st.text(
    alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd", "Po", "Zs")),
    max_size=200,
)


class TestTokenize:
    def test_strips_punctuation_and_lowercases(self):
        assert tokenize("The cat, sat.").tokens == ("the", "cat", "sat")

    def test_empty(self):
        seq = tokenize("")
        assert seq.tokens == ()
        assert len(seq) == 0

    def test_hyphen_splits(self):
        assert tokenize("RIBS-based sync").tokens == ("ribs", "based", "sync")

    def test_spans_point_into_source(self):
        text = "Alpha, beta-42 gamma!"
        seq = tokenize(text)
        for tok, (start, end) in zip(seq.tokens, seq.spans):
            assert text[start:end].lower() == tok

    @given(texts)
    def test_spans_increasing_and_no_whitespace(self, text):
        seq = tokenize(text)
        last = -1
        for tok, (start, end) in zip(seq.tokens, seq.spans):
            assert start >= last and start < end
            assert " " not in tok and tok == tok.lower()
            last = end

    @given(texts)
    def test_idempotent_on_joined_output(self, text):
        once = tokenize(text).tokens
        assert tokenize(" ".join(once)).tokens == once


class TestSplitSentences:
    @pytest.mark.parametrize(
        "text,count",
        [
            ("A b. C d.", 2),
            ("no terminal punctuation", 1),
            ("One! Two? Three.", 3),
            ("Mr. Smith went home.", 2),  # abbreviation-blind by design
        ],
    )
    def test_counts(self, text, count):
        assert len(split_sentences(text)) == count

    @given(texts)
    def test_partitions_tokens(self, text):
        doc_tokens = tokenize(text).tokens
        sents = split_sentences(text)
        flattened = tuple(tok for sent in sents for tok in sent)
        assert flattened == doc_tokens

    def test_texts_aligned(self):
        sents = split_sentences("First one here. Second one there.")
        assert sents.texts == ("First one here.", "Second one there.")


class TestSyllables:
    @pytest.mark.parametrize(
        "word,expected",
        [
            ("cat", 1),
            ("readable", 3),
            ("a", 1),
            ("the", 1),
            ("make", 1),
            ("able", 2),
            ("apple", 2),
            ("orange", 2),
            ("banana", 3),
            ("syllable", 3),
            ("queue", 1),
            ("rhythm", 1),  # no vowel group; clamped
            ("42", 1),  # numeric token; clamped
        ],
    )
    def test_hand_verified_words(self, word, expected):
        assert count_syllables(word) == expected

    def test_empty_token_rejected(self):
        with pytest.raises(EmptyText):
            count_syllables("")

    @given(st.text(alphabet=st.characters(whitelist_categories=("Ll",)), min_size=1, max_size=20))
    def test_at_least_one(self, word):
        assert count_syllables(word) >= 1


class TestNgrams:
    def test_bigrams(self):
        grams = ngrams(["the", "cat", "sat"], 2)
        assert grams == {("the", "cat"): 1, ("cat", "sat"): 1}

    def test_window_longer_than_sequence(self):
        assert ngrams(["a"], 2) == {}

    def test_multiplicity(self):
        assert ngrams(["a", "a", "a"], 1) == {("a",): 3}

    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            ngrams(["a"], 0)

    @given(st.lists(st.sampled_from("abcde"), max_size=30), st.integers(1, 6))
    def test_total_count(self, seq, n):
        assert sum(ngrams(seq, n).values()) == max(0, len(seq) - n + 1)


class TestReadabilityStats:
    def test_fixture_sentences(self):
        stats = readability_stats("The cat sat. The dog ran.", frozenset(["the", "cat", "sat", "dog"]))
        assert stats.asl == 3.0
        assert stats.asw == 1.0
        assert stats.pdw == pytest.approx(1 / 6)  # only "ran" is unfamiliar

    def test_pdw_bounds(self):
        assert readability_stats("one two three.", frozenset()).pdw == 1.0
        assert readability_stats("one two three.", frozenset(["one", "two", "three"])).pdw == 0.0

    def test_empty_text(self):
        with pytest.raises(EmptyText):
            readability_stats("...", frozenset())


class TestFamiliarWords:
    def test_bundled_list_loads(self):
        words = load_familiar_words()
        assert len(words) > 500
        assert "the" in words and "water" in words
        assert all(w == w.lower() for w in words)

    def test_file_override(self, tmp_path):
        path = tmp_path / "words.txt"
        path.write_text("# comment\nAlpha\nbeta\n\n", "utf-8")
        assert load_familiar_words(path) == frozenset({"alpha", "beta"})


def test_module_is_pure_functions():
    # No state leaks between calls: same inputs, same outputs.
    assert tokenize("Same text.") == tokenize("Same text.")
    assert split_sentences("A. B.").texts == split_sentences("A. B.").texts
    assert textproc.ngrams(("x", "y"), 1) == textproc.ngrams(("x", "y"), 1)
