import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_edit_distance, oracle_pass_at_k

from minrepair.metrics import (
    MeanStd,
    SampleOutcome,
    bleu4_smoothed,
    compilable_at_k,
    ed_family,
    edit_distance,
    exact_match,
    mean_std,
    pass_at_k,
)


def outcome(pair_id, idx, verdict, ed, bleu=50.0, em=False):
    return SampleOutcome.from_verdict(pair_id, idx, verdict, ed, bleu, em)


class TestPassAtK:
    def test_no_correct_samples(self):
        assert pass_at_k(100, 0, 10) == 0.0

    def test_k1_reduces_to_rate(self):
        assert pass_at_k(100, 1, 1) == pytest.approx(0.01, abs=1e-12)

    def test_enumerated_example(self):
        # All C(5,2)=10 subsets; 7 contain at least one of the 2 correct.
        assert pass_at_k(5, 2, 2) == pytest.approx(0.7, abs=1e-12)
        assert oracle_pass_at_k(5, 2, 2) == pytest.approx(0.7)

    def test_boundaries(self):
        for n in (1, 3, 9):
            for k in range(1, n + 1):
                assert pass_at_k(n, n, k) == 1.0
                assert pass_at_k(n, 0, k) == 0.0

    def test_matches_enumeration_small(self):
        for n in range(1, 7):
            for c in range(n + 1):
                for k in range(1, n + 1):
                    expected = float(oracle_pass_at_k(n, c, k))
                    assert pass_at_k(n, c, k) == pytest.approx(expected, abs=1e-12)

    @given(st.integers(1, 40), st.data())
    @settings(max_examples=60)
    def test_monotone_in_k_and_c(self, n, data):
        c = data.draw(st.integers(0, n))
        k = data.draw(st.integers(1, n))
        if k < n:
            assert pass_at_k(n, c, k) <= pass_at_k(n, c, k + 1) + 1e-15
        if c < n:
            assert pass_at_k(n, c, k) <= pass_at_k(n, c + 1, k) + 1e-15

    @pytest.mark.parametrize("n,c,k", [(0, 0, 1), (5, -1, 1), (5, 6, 1), (5, 2, 0), (5, 2, 6)])
    def test_precondition_errors(self, n, c, k):
        with pytest.raises(ValueError):
            pass_at_k(n, c, k)

    def test_compilable_alias(self):
        assert compilable_at_k(100, 100, 1) == 1.0
        assert compilable_at_k(4, 1, 2) == pytest.approx(0.5, abs=1e-12)
        assert compilable_at_k(3, 0, 3) == 0.0


class TestEditDistance:
    def test_identity(self):
        assert edit_distance("abc", "abc") == 0

    def test_insertions_only(self):
        assert edit_distance("", "abc") == 3
        assert edit_distance("abc", "") == 3

    def test_kitten_sitting(self):
        assert edit_distance("kitten", "sitting") == 3
        assert oracle_edit_distance("kitten", "sitting") == 3

    def test_unicode_scalar_values(self):
        # One substitution regardless of UTF-8 byte width.
        assert edit_distance("héllo", "hello") == 1
        assert edit_distance("aあb", "ab") == 1

    def test_against_oracle_random(self):
        rng = random.Random(20240301)
        alphabet = "abcXYZ(){} \n"
        for _ in range(300):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 24)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 24)))
            assert edit_distance(a, b) == oracle_edit_distance(a, b)
            assert edit_distance(a, b) == edit_distance(b, a)


class TestBleu:
    def test_identity_is_100(self):
        assert bleu4_smoothed([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == 100.0

    def test_empty_candidate(self):
        assert bleu4_smoothed([], [1, 2, 3]) == 0.0

    def test_short_identity_smooths_to_100(self):
        # Orders 3 and 4 have no n-grams; add-one smoothing keeps them at 1.
        assert bleu4_smoothed([7, 8], [7, 8]) == 100.0

    def test_hand_computed_example(self):
        # cand [1,2,3,4,9] vs ref [1,2,3,4,5]:
        #   p1 = 4/5, p2 = (3+1)/(4+1), p3 = (2+1)/(3+1), p4 = (1+1)/(2+1)
        #   BP = 1 (equal lengths), BLEU = 100 * (0.8*0.8*0.75*(2/3))**0.25
        expected = 100.0 * (0.8 * 0.8 * 0.75 * (2.0 / 3.0)) ** 0.25
        assert bleu4_smoothed([1, 2, 3, 4, 9], [1, 2, 3, 4, 5]) == pytest.approx(expected, abs=1e-9)

    def test_no_unigram_overlap_is_zero(self):
        assert bleu4_smoothed([1, 2, 3], [4, 5, 6]) == 0.0

    def test_brevity_penalty_applies_to_short_candidates(self):
        # 4 matching tokens out of a 8-token reference.
        long_ref = [1, 2, 3, 4, 5, 6, 7, 8]
        short = bleu4_smoothed([1, 2, 3, 4], long_ref)
        full = bleu4_smoothed(long_ref, long_ref)
        assert short < full
        # BP = exp(1 - 8/4); precisions are all exactly 1.
        assert short == pytest.approx(100.0 * math.exp(1 - 2), rel=1e-12)


class TestExactMatch:
    def test_equal(self):
        assert exact_match("x=1\n", "x=1\n")

    def test_trailing_newline_differs(self):
        assert not exact_match("x=1\n", "x=1")

    def test_whitespace_sensitive(self):
        assert not exact_match("x = 1", "x  = 1")

    def test_implies_zero_ed_and_full_bleu(self):
        text = "print(42)\n"
        assert exact_match(text, text)
        assert edit_distance(text, text) == 0
        tokens = [ord(ch) for ch in text]
        assert bleu4_smoothed(tokens, tokens) == 100.0


class TestSampleOutcome:
    def test_correct_implies_compilable(self):
        with pytest.raises(ValueError):
            SampleOutcome("p", 0, correct=True, compilable=False,
                          ed_to_source=0, bleu_vs_target=0.0, exact_match_vs_target=False)

    def test_from_verdict(self):
        assert outcome("p", 0, "AC", 1).correct
        assert outcome("p", 0, "WA", 1).compilable
        assert not outcome("p", 0, "CE", 1).compilable


class TestEdFamily:
    def test_single_pair_mixed(self):
        outcomes = [outcome("p1", 0, "AC", 5), outcome("p1", 1, "WA", 9)]
        family = ed_family(outcomes)
        assert family.ed_all.mean == pytest.approx(7.0)
        assert family.ed_correct.mean == pytest.approx(5.0)
        assert family.ed_top1.mean == pytest.approx(5.0)

    def test_all_wrong_pair_undefined(self):
        outcomes = [outcome("p1", 0, "WA", 3), outcome("p1", 1, "RE", 4)]
        family = ed_family(outcomes)
        assert family.ed_all is not None
        assert family.ed_correct is None
        assert family.ed_top1 is None

    def test_top1_over_two_pairs(self):
        outcomes = [
            outcome("p1", 0, "AC", 4), outcome("p1", 1, "AC", 8),
            outcome("p2", 0, "AC", 6), outcome("p2", 1, "WA", 1),
        ]
        family = ed_family(outcomes)
        assert family.ed_top1.mean == pytest.approx(5.0)  # min({4,8})=4, min({6})=6
        assert family.ed_top1.std == pytest.approx(1.0)

    def test_pairs_without_correct_excluded_from_top1(self):
        outcomes = [
            outcome("p1", 0, "AC", 4),
            outcome("p2", 0, "WA", 100),
        ]
        family = ed_family(outcomes)
        assert family.ed_top1.mean == pytest.approx(4.0)
        assert family.ed_correct.mean == pytest.approx(4.0)
        assert family.ed_all.mean == pytest.approx(52.0)

    def test_top1_not_exceeding_any_correct_sample(self):
        rng = random.Random(7)
        outcomes = []
        for p in range(8):
            for i in range(10):
                verdict = rng.choice(["AC", "WA", "RE"])
                outcomes.append(outcome(f"p{p}", i, verdict, rng.randrange(0, 40)))
        family = ed_family(outcomes)
        by_pair = {}
        for o in outcomes:
            if o.correct:
                by_pair.setdefault(o.pair_id, []).append(o.ed_to_source)
        if by_pair:
            for eds in by_pair.values():
                assert min(eds) <= max(eds)
            expected = mean_std([min(eds) for _, eds in sorted(by_pair.items())])
            assert family.ed_top1 == expected


class TestMeanStd:
    def test_empty_is_none(self):
        assert mean_std([]) is None

    def test_single_value(self):
        assert mean_std([10.0]) == MeanStd(10.0, 0.0)

    def test_population_std(self):
        got = mean_std([2, 4, 6])
        assert got.mean == pytest.approx(4.0)
        assert got.std == pytest.approx(math.sqrt(8.0 / 3.0), abs=1e-12)
