"""Scalar metrics for repair candidates.

Covers the unbiased pass@k / compilable@k estimators, character-level
Levenshtein distance, smoothed BLEU-4 over token ids, exact match, and
the edit-distance aggregates (All / Correct / Top-1).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .verdicts import AC, CE


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator of the probability that at least one of k
    samples drawn without replacement from n generated samples is correct.

    Computes 1 - C(n-c, k) / C(n, k) in product form (no factorials):
    1 - prod_{i=n-c+1..n} (1 - k/i). Exactly 1.0 when n - c < k (k slots
    cannot all be filled with incorrect samples) and exactly 0.0 when
    c == 0.

    Args:
        n: samples generated, >= 1.
        c: qualifying samples, 0 <= c <= n.
        k: selection size, 1 <= k <= n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= c <= n:
        raise ValueError(f"c must be in [0, {n}], got {c}")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if n - c < k:
        return 1.0
    if c == 0:
        return 0.0
    return 1.0 - math.prod(1.0 - k / i for i in range(n - c + 1, n + 1))


def compilable_at_k(n: int, c: int, k: int) -> float:
    """Same estimator as pass_at_k with c counting compilable samples."""
    return pass_at_k(n, c, k)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over Unicode scalar values.

    Unit cost for insert, delete, and substitute. O(|a|*|b|) time,
    O(min(|a|, |b|)) memory.
    """
    if a == b:
        return 0
    # Strip common prefix/suffix; they never participate in an optimal edit.
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        append = cur.append
        left = i
        for j, cb in enumerate(b, start=1):
            cost = prev[j - 1] + (ca != cb)
            up = prev[j] + 1
            left = min(cost, up, left + 1)
            append(left)
        prev = cur
    return prev[-1]


def _ngram_counts(tokens: Sequence, order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def bleu4_smoothed(candidate: Sequence, reference: Sequence) -> float:
    """Smoothed BLEU-4 over token sequences, scaled to [0, 100].

    Uniform weights over n-gram orders 1..4, single reference. Add-one
    smoothing on the numerator and denominator of the modified precision
    for orders >= 2; order 1 is unsmoothed (zero unigram overlap scores
    0). Brevity penalty exp(1 - |ref|/|cand|) when the candidate is
    shorter than the reference, else 1. Empty candidate scores 0 by
    convention.
    """
    cand = list(candidate)
    ref = list(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for order in range(1, 5):
        counts = _ngram_counts(cand, order)
        ref_counts = _ngram_counts(ref, order)
        total = max(len(cand) - order + 1, 0)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in counts.items())
        if order == 1:
            if clipped == 0:
                return 0.0
            precision = clipped / total
        else:
            precision = (clipped + 1) / (total + 1)
        log_sum += 0.25 * math.log(precision)
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return 100.0 * brevity * math.exp(log_sum)


def exact_match(candidate: str, target: str) -> bool:
    """Byte equality, no normalization."""
    return candidate == target


@dataclass(frozen=True)
class SampleOutcome:
    """Judged, measured result of one generated sample for one pair."""

    pair_id: str
    sample_index: int
    correct: bool
    compilable: bool
    ed_to_source: int
    bleu_vs_target: float
    exact_match_vs_target: bool

    def __post_init__(self):
        if self.correct and not self.compilable:
            raise ValueError("a correct sample is necessarily compilable")
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        if self.ed_to_source < 0:
            raise ValueError("ed_to_source must be >= 0")
        if not 0.0 <= self.bleu_vs_target <= 100.0:
            raise ValueError("bleu_vs_target must be in [0, 100]")

    @classmethod
    def from_verdict(
        cls,
        pair_id: str,
        sample_index: int,
        verdict: str,
        ed_to_source: int,
        bleu_vs_target: float,
        exact_match_vs_target: bool,
    ) -> "SampleOutcome":
        return cls(
            pair_id=pair_id,
            sample_index=sample_index,
            correct=verdict == AC,
            compilable=verdict != CE,
            ed_to_source=ed_to_source,
            bleu_vs_target=bleu_vs_target,
            exact_match_vs_target=exact_match_vs_target,
        )


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float


@dataclass(frozen=True)
class EdFamily:
    """Edit-distance aggregates; fields are None when no sample qualifies."""

    ed_all: Optional[MeanStd]
    ed_correct: Optional[MeanStd]
    ed_top1: Optional[MeanStd]


def mean_std(values: Iterable[float]) -> Optional[MeanStd]:
    """Mean and population (N-divisor) standard deviation; None if empty."""
    vals = list(values)
    if not vals:
        return None
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((v - mean) ** 2 for v in vals) / len(vals)
    return MeanStd(mean, math.sqrt(var))


def ed_family(outcomes: Iterable[SampleOutcome]) -> EdFamily:
    """Aggregate ed_to_source three ways.

    ed_all averages over every sample of every pair; ed_correct over the
    correct samples only; ed_top1 takes, per pair with at least one
    correct sample, the minimum ed_to_source among its correct samples,
    then averages over those pairs. Pairs with zero correct samples do
    not enter the ed_correct or ed_top1 denominators.

    Reduction order is (pair_id, sample_index) so results are
    run-to-run identical.
    """
    ordered = sorted(outcomes, key=lambda o: (o.pair_id, o.sample_index))
    all_eds = [o.ed_to_source for o in ordered]
    correct_eds = [o.ed_to_source for o in ordered if o.correct]
    best_by_pair: dict[str, int] = {}
    for o in ordered:
        if o.correct:
            prev = best_by_pair.get(o.pair_id)
            if prev is None or o.ed_to_source < prev:
                best_by_pair[o.pair_id] = o.ed_to_source
    top1_eds = [best_by_pair[pid] for pid in sorted(best_by_pair)]
    return EdFamily(
        ed_all=mean_std(all_eds),
        ed_correct=mean_std(correct_eds),
        ed_top1=mean_std(top1_eds),
    )
