from __future__ import annotations

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sumlab.lexmetrics import EmptyText, NoReference, PrfScore, bleu, dcr, fre, rouge_l, rouge_n

# --- independent oracles -----------------------------------------------------


def oracle_clipped_overlap(cand: list[str], ref: list[str], n: int) -> int:
    """Clipped multiset n-gram intersection, counted the slow literal way."""

    def grams(seq):
        return [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]

    cand_grams = grams(cand)
    ref_grams = grams(ref)
    overlap = 0
    for gram in set(cand_grams):
        overlap += min(cand_grams.count(gram), ref_grams.count(gram))
    return overlap


def oracle_prf(cand: list[str], ref: list[str], n: int) -> tuple[float, float, float]:
    total_c = max(0, len(cand) - n + 1)
    total_r = max(0, len(ref) - n + 1)
    if total_c == 0 and total_r == 0:
        return 1.0, 1.0, 1.0
    if total_c == 0 or total_r == 0:
        return 0.0, 0.0, 0.0
    overlap = oracle_clipped_overlap(cand, ref, n)
    p = overlap / total_c
    r = overlap / total_r
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f


def oracle_lcs(a: list[str], b: list[str]) -> int:
    """Exhaustive: longest subsequence of `a` that is also a subsequence of `b`."""

    def is_subseq(sub, seq):
        it = iter(seq)
        return all(tok in it for tok in sub)

    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        if len(sub) > best and is_subseq(sub, b):
            best = len(sub)
    return best


tokens5 = st.lists(st.sampled_from("abcde"), max_size=12)


# --- ROUGE --------------------------------------------------------------------


class TestRougeN:
    def test_hand_counted_unigram_overlap(self):
        score = rouge_n(["the", "cat", "sat"], ["the", "cat", "ran"], 1)
        assert score.precision == pytest.approx(2 / 3)
        assert score.recall == pytest.approx(2 / 3)
        assert score.f1 == pytest.approx(2 / 3, abs=1e-4)

    def test_identity(self):
        assert rouge_n(["x", "y", "z"], ["x", "y", "z"], 2) == PrfScore(1.0, 1.0, 1.0)

    def test_one_shared_bigram_of_two(self):
        score = rouge_n(["the", "cat", "sat"], ["the", "cat", "ran"], 2)
        assert (score.precision, score.recall, score.f1) == (0.5, 0.5, 0.5)

    def test_n_out_of_contract(self):
        with pytest.raises(ValueError):
            rouge_n(["a"], ["a"], 3)

    def test_empty_side_conventions(self):
        assert rouge_n([], [], 1).f1 == 1.0
        assert rouge_n(["a"], [], 1).f1 == 0.0
        assert rouge_n([], ["a"], 1).f1 == 0.0

    @given(tokens5, tokens5, st.sampled_from([1, 2]))
    def test_matches_oracle(self, cand, ref, n):
        got = rouge_n(cand, ref, n)
        want = oracle_prf(cand, ref, n)
        assert got.precision == pytest.approx(want[0], abs=1e-12)
        assert got.recall == pytest.approx(want[1], abs=1e-12)
        assert got.f1 == pytest.approx(want[2], abs=1e-12)

    @given(tokens5, tokens5, st.sampled_from([1, 2]))
    def test_swap_symmetry(self, cand, ref, n):
        a = rouge_n(cand, ref, n)
        b = rouge_n(ref, cand, n)
        assert a.precision == pytest.approx(b.recall)
        assert a.recall == pytest.approx(b.precision)
        assert a.f1 == pytest.approx(b.f1)

    def test_recall_monotone_in_matching_tokens(self):
        rng = random.Random(4)
        for _ in range(100):
            cand = [rng.choice("abcde") for _ in range(rng.randrange(0, 8))]
            ref = [rng.choice("abcde") for _ in range(rng.randrange(1, 8))]
            before = rouge_n(cand, ref, 1).recall
            after = rouge_n(cand + [rng.choice(ref)], ref, 1).recall
            assert after >= before - 1e-12


class TestRougeL:
    def test_hand_checked_lcs(self):
        score = rouge_l(["a", "b", "c", "d"], ["a", "c", "b", "d"])
        assert (score.precision, score.recall, score.f1) == (0.75, 0.75, 0.75)

    def test_disjoint(self):
        assert rouge_l(["a", "b"], ["c", "d"]) == PrfScore(0.0, 0.0, 0.0)

    def test_identity(self):
        assert rouge_l(["q", "r"], ["q", "r"]) == PrfScore(1.0, 1.0, 1.0)

    @given(st.lists(st.sampled_from("abcde"), max_size=10), st.lists(st.sampled_from("abcde"), max_size=10))
    def test_matches_exhaustive_oracle(self, a, b):
        got = rouge_l(a, b)
        if not a and not b:
            assert got.f1 == 1.0
            return
        if not a or not b:
            assert got.f1 == 0.0
            return
        lcs = oracle_lcs(a, b)
        assert got.precision == pytest.approx(lcs / len(a), abs=1e-12)
        assert got.recall == pytest.approx(lcs / len(b), abs=1e-12)


# --- BLEU ----------------------------------------------------------------------


class TestBleu:
    def test_perfect_match(self):
        assert bleu(["the", "cat", "sat"], [["the", "cat", "sat"]]) == pytest.approx(1.0)

    def test_zero_on_disjoint_unigrams(self):
        assert bleu(["a", "b"], [["c", "d"]]) == 0.0

    def test_truncated_n_short_candidate(self):
        got = bleu(["the", "cat"], [["the", "cat", "sat"]])
        assert got == pytest.approx(math.exp(1 - 3 / 2), abs=1e-4)

    def test_no_reference(self):
        with pytest.raises(NoReference):
            bleu(["a"], [])

    def test_brevity_penalty_prefers_closest_reference(self):
        # refs of length 2 and 9; candidate of 2 -> closest ref 2, BP = 1
        assert bleu(["a", "b"], [["a", "b"], ["a", "b"] * 4 + ["a"]]) == pytest.approx(1.0)

    def test_smoothing_toggle_rescues_zero(self):
        cand = ["a", "b", "c"]
        ref = ["a", "x", "c"]  # no shared bigram
        assert bleu(cand, [ref]) == 0.0
        assert 0.0 < bleu(cand, [ref], smoothing=True) < 1.0

    def test_empty_candidate_scores_zero(self):
        assert bleu([], [["a"]]) == 0.0

    @given(tokens5, st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=12), min_size=1, max_size=3))
    def test_bounds(self, cand, refs):
        assert 0.0 <= bleu(cand, refs) <= 1.0 + 1e-12

    def test_multi_reference_clipping(self):
        # "a a" clipped by max reference count of "a" (2 in second ref)
        got = bleu(["a", "a"], [["a", "b"], ["a", "a"]])
        assert got == pytest.approx(1.0)


# --- readability ----------------------------------------------------------------


class TestReadability:
    def test_fre_fixture(self):
        assert fre("The cat sat. The dog ran.") == pytest.approx(119.19, abs=1e-4)

    def test_fre_single_word(self):
        assert fre("Go.") == pytest.approx(121.22, abs=1e-4)

    def test_fre_empty(self):
        with pytest.raises(EmptyText):
            fre("")

    def test_dcr_all_familiar(self):
        familiar = frozenset(["the", "cat", "sat", "dog", "ran"])
        assert dcr("The cat sat. The dog ran.", familiar) == pytest.approx(0.1488, abs=1e-4)

    def test_dcr_all_difficult(self):
        assert dcr("The cat sat. The dog ran.", frozenset()) == pytest.approx(15.9388, abs=1e-4)

    def test_dcr_empty(self):
        with pytest.raises(EmptyText):
            dcr("", frozenset())

    def test_fre_decreases_with_syllables(self):
        # Same sentence shape, heavier words: ASL fixed at 3, ASW rises.
        easy = fre("The cat sat. The dog ran.")
        hard = fre("The animal rested. The animal wandered.")
        assert hard < easy

    def test_dcr_increases_with_difficult_words(self):
        text = "The cat sat. The dog ran."
        all_known = frozenset(["the", "cat", "sat", "dog", "ran"])
        some_known = frozenset(["the", "cat", "sat"])
        assert dcr(text, some_known) > dcr(text, all_known)


class TestPrfScore:
    def test_zero_sum_yields_zero_f1(self):
        assert PrfScore.from_pr(0.0, 0.0).f1 == 0.0

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_harmonic_mean_bounds(self, p, r):
        score = PrfScore.from_pr(p, r)
        assert 0.0 <= score.f1 <= 1.0
        assert score.f1 <= max(p, r) + 1e-12
