"""Evaluation orchestration: generate -> judge -> metrics over a pair set,
aggregated into a serializable report plus scatter / bucketed breakdowns."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from . import judge as judge_mod
from . import metrics
from . import tokenizer as bpe
from .corpus import CodePair
from .errors import EvaluationError, MinrepairError
from .generate import Candidate, GeneratorConfig
from .metrics import EdFamily, MeanStd, SampleOutcome

REPORT_KS = (1, 10, 100)

GeneratorFn = Callable[[CodePair], list[Candidate]]


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    pass_at: dict[int, float]
    compilable_at: dict[int, float]
    bleu: float
    exact_match_rate: float
    ed_all: Optional[MeanStd]
    ed_correct: Optional[MeanStd]
    ed_top1: Optional[MeanStd]
    n_pairs: int
    n_samples_per_pair: int
    config: GeneratorConfig
    seed: int
    judge_limits: dict[str, int]


@dataclass(frozen=True)
class PairEval:
    """Per-pair evaluation detail backing the scatter and bucket views."""

    pair_id: str
    problem_id: str
    original_ed: int
    n: int
    c_correct: int
    c_compilable: int
    outcomes: tuple[SampleOutcome, ...]


@dataclass(frozen=True)
class EvalRun:
    report: EvalReport
    pairs: tuple[PairEval, ...]


@dataclass(frozen=True)
class Bucket:
    ed_lo: int
    ed_hi: int
    mean_pass: Optional[float]
    n_pairs: int


@dataclass(frozen=True)
class GroupedPass:
    bucket_width: int
    buckets: tuple[Bucket, ...]


@dataclass(frozen=True)
class ScatterPoint:
    original_ed: int
    generated_ed: int
    pair_correct: bool


@dataclass(frozen=True)
class ScatterData:
    points: tuple[ScatterPoint, ...]


def evaluate(
    pairs: Sequence[CodePair],
    generator: GeneratorFn,
    problems: Mapping[str, judge_mod.ProblemSpec],
    tokenizer_model: bpe.TokenizerModel,
    *,
    model_id: str,
    config: Optional[GeneratorConfig] = None,
    seed: int = 0,
    jobs: Optional[int] = None,
    cache: Optional[judge_mod.JudgeCache] = None,
    preloaded_verdicts: Optional[Mapping[tuple[str, int], str]] = None,
    judge_limits: Optional[dict[str, int]] = None,
) -> EvalRun:
    """Evaluate a generator over pairs.

    Per pair the generator supplies its samples, every sample is judged
    (or looked up in preloaded_verdicts), and per-sample outcomes (edit
    distance to the wrong source, BLEU and exact match against the
    target) are aggregated. pass@k / compilable@k use the unbiased
    per-pair estimator averaged over pairs, for each k in {1, 10, 100}
    not exceeding the sample count; BLEU and exact match average over
    all samples. Reduction order is sorted (pair_id, sample_index), so
    a fixed input set and seed reproduces the report byte-for-byte.
    """
    if not pairs:
        raise EvaluationError("no pairs to evaluate", [])
    ordered = sorted(pairs, key=lambda p: p.pair_id)
    completed: list[str] = []

    if preloaded_verdicts is None:
        missing = sorted({p.problem_id for p in ordered} - set(problems))
        if missing:
            raise EvaluationError(f"problems not found: {', '.join(missing)}", completed)

    per_pair_candidates: list[tuple[CodePair, list[Candidate]]] = []
    n_samples = None
    for pair in ordered:
        candidates = generator(pair)
        if not candidates:
            raise EvaluationError(f"generator produced no samples for pair {pair.pair_id}", completed)
        indices = [c.sample_index for c in candidates]
        if indices != list(range(len(candidates))):
            raise EvaluationError(f"generator sample indices must be 0..n-1 for pair {pair.pair_id}", completed)
        if n_samples is None:
            n_samples = len(candidates)
        elif len(candidates) != n_samples:
            raise EvaluationError(
                f"generator produced {len(candidates)} samples for pair {pair.pair_id}, expected {n_samples}",
                completed,
            )
        per_pair_candidates.append((pair, candidates))

    verdict_of: dict[tuple[str, int], str] = {}
    if preloaded_verdicts is not None:
        for pair, candidates in per_pair_candidates:
            for cand in candidates:
                key = (cand.pair_id, cand.sample_index)
                if key not in preloaded_verdicts:
                    raise EvaluationError(f"no preloaded verdict for {key}", completed)
                verdict_of[key] = preloaded_verdicts[key]
    else:
        problems_by_pair = {pair.pair_id: problems[pair.problem_id] for pair, _ in per_pair_candidates}
        flat = [cand for _, candidates in per_pair_candidates for cand in candidates]
        entries = judge_mod.judge_batch(flat, problems_by_pair, jobs=jobs, cache=cache)
        failures = [e.error for e in entries if e.error is not None]
        if failures:
            raise EvaluationError(f"judging failed: {failures[0]}", completed)
        for entry in entries:
            verdict_of[(entry.candidate.pair_id, entry.candidate.sample_index)] = entry.result.verdict

    pair_evals: list[PairEval] = []
    for pair, candidates in per_pair_candidates:
        target_tokens = bpe.encode(tokenizer_model, pair.correct_source)
        outcomes = []
        for cand in sorted(candidates, key=lambda c: c.sample_index):
            verdict = verdict_of[(cand.pair_id, cand.sample_index)]
            outcomes.append(
                SampleOutcome.from_verdict(
                    pair_id=pair.pair_id,
                    sample_index=cand.sample_index,
                    verdict=verdict,
                    ed_to_source=metrics.edit_distance(pair.wrong_source, cand.source),
                    bleu_vs_target=metrics.bleu4_smoothed(
                        bpe.encode(tokenizer_model, cand.source), target_tokens
                    ),
                    exact_match_vs_target=metrics.exact_match(cand.source, pair.correct_source),
                )
            )
        pair_evals.append(
            PairEval(
                pair_id=pair.pair_id,
                problem_id=pair.problem_id,
                original_ed=pair.original_ed,
                n=len(outcomes),
                c_correct=sum(o.correct for o in outcomes),
                c_compilable=sum(o.compilable for o in outcomes),
                outcomes=tuple(outcomes),
            )
        )
        completed.append(pair.pair_id)

    ks = [k for k in REPORT_KS if k <= n_samples]
    pass_at = {
        k: math.fsum(metrics.pass_at_k(pe.n, pe.c_correct, k) for pe in pair_evals) / len(pair_evals)
        for k in ks
    }
    compilable_at = {
        k: math.fsum(metrics.compilable_at_k(pe.n, pe.c_compilable, k) for pe in pair_evals) / len(pair_evals)
        for k in ks
    }
    all_outcomes = [o for pe in pair_evals for o in pe.outcomes]
    bleu = math.fsum(o.bleu_vs_target for o in all_outcomes) / len(all_outcomes)
    em_rate = sum(o.exact_match_vs_target for o in all_outcomes) / len(all_outcomes)
    family: EdFamily = metrics.ed_family(all_outcomes)

    if config is None:
        config = GeneratorConfig(n_samples=n_samples)
    elif config.n_samples != n_samples:
        raise EvaluationError(
            f"config.n_samples={config.n_samples} but generator produced {n_samples} samples per pair",
            completed,
        )
    report = EvalReport(
        model_id=model_id,
        pass_at=pass_at,
        compilable_at=compilable_at,
        bleu=bleu,
        exact_match_rate=em_rate,
        ed_all=family.ed_all,
        ed_correct=family.ed_correct,
        ed_top1=family.ed_top1,
        n_pairs=len(pair_evals),
        n_samples_per_pair=n_samples,
        config=config,
        seed=seed,
        judge_limits=dict(judge_limits) if judge_limits else {
            "default_time_ms": judge_mod.DEFAULT_TIME_MS,
            "default_memory_kib": judge_mod.DEFAULT_MEMORY_KIB,
        },
    )
    return EvalRun(report, tuple(pair_evals))


def pair_pass_value(pe: PairEval, k_cap: int = 100) -> float:
    """Per-pair pass@min(k_cap, n); the bucketed view's y value."""
    return metrics.pass_at_k(pe.n, pe.c_correct, min(k_cap, pe.n))


def group_pass_by_original_ed(pair_evals: Sequence[PairEval], bucket_width: int = 10) -> GroupedPass:
    """Mean per-pair pass@100 bucketed by [0,w), [w,2w), ...

    Empty buckets up to the last populated one are reported with
    n_pairs 0 and no mean.
    """
    if bucket_width <= 0:
        raise MinrepairError(f"bucket_width must be positive, got {bucket_width}")
    if not pair_evals:
        return GroupedPass(bucket_width, ())
    by_bucket: dict[int, list[float]] = {}
    for pe in pair_evals:
        by_bucket.setdefault(pe.original_ed // bucket_width, []).append(pair_pass_value(pe))
    buckets = []
    for idx in range(max(by_bucket) + 1):
        values = by_bucket.get(idx, [])
        buckets.append(
            Bucket(
                ed_lo=idx * bucket_width,
                ed_hi=(idx + 1) * bucket_width,
                mean_pass=(math.fsum(values) / len(values)) if values else None,
                n_pairs=len(values),
            )
        )
    return GroupedPass(bucket_width, tuple(buckets))


def scatter(pair_evals: Sequence[PairEval]) -> ScatterData:
    """One point per sample: x = pair's original edit distance, y = the
    sample's edit distance to the wrong source; flagged correct when the
    pair has at least one passing sample."""
    points = []
    for pe in sorted(pair_evals, key=lambda p: p.pair_id):
        pair_correct = pe.c_correct > 0
        for o in pe.outcomes:
            points.append(ScatterPoint(pe.original_ed, o.ed_to_source, pair_correct))
    return ScatterData(tuple(points))


# ---------------------------------------------------------------------------
# Serialization and rendering
# ---------------------------------------------------------------------------

def _mean_std_dict(value: Optional[MeanStd]) -> Optional[dict]:
    if value is None:
        return None
    return {"mean": value.mean, "std": value.std}


def report_to_dict(report: EvalReport) -> dict:
    return {
        "model_id": report.model_id,
        "n_pairs": report.n_pairs,
        "n_samples_per_pair": report.n_samples_per_pair,
        "pass_at": {str(k): v for k, v in sorted(report.pass_at.items())},
        "compilable_at": {str(k): v for k, v in sorted(report.compilable_at.items())},
        "bleu": report.bleu,
        "exact_match_rate": report.exact_match_rate,
        "ed_all": _mean_std_dict(report.ed_all),
        "ed_correct": _mean_std_dict(report.ed_correct),
        "ed_top1": _mean_std_dict(report.ed_top1),
        "config": {
            "n_samples": report.config.n_samples,
            "temperature": report.config.temperature,
            "max_tokens": report.config.max_tokens,
        },
        "seed": report.seed,
        "judge_limits": dict(sorted(report.judge_limits.items())),
        "aggregation": {
            "bleu_exact_match": "mean_over_all_samples",
            "ed_all": "per_sample",
        },
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(path: str | Path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))


def report_from_dict(data: dict) -> EvalReport:
    def mean_std(obj):
        return None if obj is None else MeanStd(obj["mean"], obj["std"])

    config = data.get("config", {})
    return EvalReport(
        model_id=data["model_id"],
        pass_at={int(k): v for k, v in data["pass_at"].items()},
        compilable_at={int(k): v for k, v in data["compilable_at"].items()},
        bleu=data["bleu"],
        exact_match_rate=data["exact_match_rate"],
        ed_all=mean_std(data.get("ed_all")),
        ed_correct=mean_std(data.get("ed_correct")),
        ed_top1=mean_std(data.get("ed_top1")),
        n_pairs=data["n_pairs"],
        n_samples_per_pair=data["n_samples_per_pair"],
        config=GeneratorConfig(
            n_samples=config.get("n_samples", 1),
            temperature=config.get("temperature", 0.7),
            max_tokens=config.get("max_tokens", 256),
        ),
        seed=data.get("seed", 0),
        judge_limits=data.get("judge_limits", {}),
    )


def load_report(path: str | Path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def _pct(value: Optional[float]) -> str:
    return "---" if value is None else f"{100.0 * value:.2f}%"


def _ed_cell(value: Optional[MeanStd]) -> str:
    return "---" if value is None else f"{value.mean:.2f} ({value.std:.2f})"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table: Pass@1/10/100, Compilable@1/10/100, BLEU,
    Exact Match, then ED All / Correct / Top-1."""
    headers = [
        "Model", "Pass@1", "Pass@10", "Pass@100",
        "Comp@1", "Comp@10", "Comp@100",
        "BLEU", "Exact Match", "ED All", "ED Correct", "ED Top-1",
    ]
    rows = [headers]
    for r in reports:
        rows.append([
            r.model_id,
            _pct(r.pass_at.get(1)), _pct(r.pass_at.get(10)), _pct(r.pass_at.get(100)),
            _pct(r.compilable_at.get(1)), _pct(r.compilable_at.get(10)), _pct(r.compilable_at.get(100)),
            f"{r.bleu:.2f}",
            _pct(r.exact_match_rate),
            _ed_cell(r.ed_all), _ed_cell(r.ed_correct), _ed_cell(r.ed_top1),
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = []
    for row_no, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if row_no == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    return "\n".join(lines) + "\n"


def write_scatter_csv(path: str | Path, data: ScatterData) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["original_ed", "generated_ed", "pair_correct"])
        for p in data.points:
            writer.writerow([p.original_ed, p.generated_ed, str(p.pair_correct).lower()])


def write_grouped_csv(path: str | Path, grouped: GroupedPass) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ed_lo", "ed_hi", "mean_pass_at_100", "n_pairs"])
        for b in grouped.buckets:
            writer.writerow([b.ed_lo, b.ed_hi, "" if b.mean_pass is None else repr(b.mean_pass), b.n_pairs])
