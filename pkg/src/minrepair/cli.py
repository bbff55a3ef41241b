"""Command-line entry point.

Subcommands mirror the pipeline: corpus pair/filter/dedupe/split/stats,
tokenizer train/encode, generate, judge run, evaluate, suggest, and
report render. Artifact-producing commands write a run manifest next to
their output. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, corpus, evalreport, suggest as suggest_mod
from . import generate as gen_mod
from . import judge as judge_mod
from . import tokenizer as bpe
from .errors import EvaluationError, MinrepairError, NoCorrectCandidate, UnknownProblemError

PROBLEMS_ENV = "MINREPAIR_PROBLEMS_DIR"


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_hash(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in vars(args).items() if k != "func"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _write_manifest(args: argparse.Namespace, out_path: str, inputs: list, outputs: list,
                    seeds: dict | None = None, started_at: str | None = None) -> None:
    manifest = {
        "tool": "minrepair",
        "tool_version": __version__,
        "subcommand": getattr(args, "_subcommand", ""),
        "config_hash": _config_hash(args),
        "inputs": {str(p): _sha256_file(p) for p in inputs if p and Path(p).is_file()},
        "outputs": {str(p): _sha256_file(p) for p in outputs if p and Path(p).is_file()},
        "seeds": seeds or {},
        "started_at": started_at,
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="milliseconds"),
    }
    with open(str(out_path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _print_seed(seed: int) -> None:
    print(f"seed: {seed}", file=sys.stderr)


def _problems_dir(args: argparse.Namespace) -> str:
    problems = args.problems or os.environ.get(PROBLEMS_ENV)
    if not problems:
        raise MinrepairError(
            f"no problems directory: pass --problems or set {PROBLEMS_ENV}"
        )
    return problems


# ---------------------------------------------------------------------------
# corpus subcommands
# ---------------------------------------------------------------------------

def cmd_corpus_pair(args) -> int:
    started = _now()
    records = corpus.read_submissions(args.submissions)
    pairs = corpus.pair_submissions(records)
    corpus.write_pairs(args.out, pairs)
    print(f"paired {len(records)} submissions into {len(pairs)} pairs", file=sys.stderr)
    _write_manifest(args, args.out, [args.submissions], [args.out], started_at=started)
    return 0


def cmd_corpus_filter(args) -> int:
    started = _now()
    pairs = corpus.read_pairs(args.pairs)
    model = bpe.load_model(args.tokenizer)
    kept = corpus.filter_pairs(pairs, model, args.max_len)
    corpus.write_pairs(args.out, kept)
    print(f"kept {len(kept)} of {len(pairs)} pairs", file=sys.stderr)
    _write_manifest(args, args.out, [args.pairs, args.tokenizer], [args.out], started_at=started)
    return 0


def cmd_corpus_dedupe(args) -> int:
    started = _now()
    pairs = corpus.read_pairs(args.pairs)
    unique = corpus.dedupe_pairs(pairs)
    corpus.write_pairs(args.out, unique)
    print(f"kept {len(unique)} of {len(pairs)} pairs", file=sys.stderr)
    _write_manifest(args, args.out, [args.pairs], [args.out], started_at=started)
    return 0


def cmd_corpus_split(args) -> int:
    started = _now()
    pairs = corpus.read_pairs(args.pairs)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise MinrepairError(f"--ratios needs three comma-separated values, got {args.ratios!r}")
    split = corpus.split_pairs(pairs, args.seed, ratios)  # type: ignore[arg-type]
    corpus.write_split_manifest(args.out, split)
    _print_seed(args.seed)
    print(
        f"split {len(pairs)} pairs into {len(split.train)}/{len(split.valid)}/{len(split.test)}",
        file=sys.stderr,
    )
    _write_manifest(args, args.out, [args.pairs], [args.out],
                    seeds={"split": args.seed}, started_at=started)
    return 0


def cmd_corpus_stats(args) -> int:
    pairs = corpus.read_pairs(args.pairs)
    stats = corpus.corpus_stats(pairs)
    print(json.dumps({"count": stats.count, "mean_ed": stats.mean_ed, "std_ed": stats.std_ed},
                     sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# tokenizer subcommands
# ---------------------------------------------------------------------------

def cmd_tokenizer_train(args) -> int:
    started = _now()
    pairs = corpus.read_pairs(args.pairs)
    texts: list[str] = []
    for pair in pairs:
        texts.append(pair.wrong_source)
        texts.append(pair.correct_source)
    model = bpe.train_bpe(texts, args.vocab_size)
    bpe.save_model(model, args.out)
    print(f"trained vocab of {model.vocab_size} ({len(model.merges)} merges)", file=sys.stderr)
    _write_manifest(args, args.out, [args.pairs], [args.out], started_at=started)
    return 0


def cmd_tokenizer_encode(args) -> int:
    model = bpe.load_model(args.model)
    if args.input == "-":
        text = sys.stdin.read()
    else:
        text = Path(args.input).read_text(encoding="utf-8")
    tokens = bpe.encode(model, text)
    print(json.dumps({"count": len(tokens), "tokens": tokens}))
    return 0


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _candidates_by_pair(candidates: list[gen_mod.Candidate]) -> dict[str, list[gen_mod.Candidate]]:
    grouped: dict[str, list[gen_mod.Candidate]] = {}
    for cand in candidates:
        grouped.setdefault(cand.pair_id, []).append(cand)
    for bucket in grouped.values():
        bucket.sort(key=lambda c: c.sample_index)
    return grouped


def _resolve_generator(args, pairs: list[corpus.CodePair]):
    """Returns (generator_fn, config, model_id, pair_errors)."""
    spec = args.generator
    seed = getattr(args, "seed", 0)
    pair_errors: list[gen_mod.PairError] = []

    if spec == "copy":
        config = gen_mod.GeneratorConfig(1, args.temperature, args.max_tokens)
        return gen_mod.gen_copy, config, "copy", pair_errors

    if spec == "retrieval":
        if not args.train_pairs:
            raise MinrepairError("--generator retrieval requires --train-pairs")
        index = gen_mod.build_retrieval_index(corpus.read_pairs(args.train_pairs))
        config = gen_mod.GeneratorConfig(1, args.temperature, args.max_tokens)
        return (lambda pair: gen_mod.gen_retrieval(pair, index)), config, "retrieval", pair_errors

    if spec == "mutate":
        config = gen_mod.GeneratorConfig(args.n_samples, args.temperature, args.max_tokens)
        return (lambda pair: gen_mod.gen_mutate(pair, config, seed)), config, "mutate", pair_errors

    if spec.startswith("external:"):
        command = spec[len("external:"):]
        if not command:
            raise MinrepairError("external generator command is empty")
        config = gen_mod.GeneratorConfig(args.n_samples, args.temperature, args.max_tokens)
        result = gen_mod.run_external(command, pairs, config, timeout_s=args.protocol_timeout)
        pair_errors.extend(result.errors)
        grouped = _candidates_by_pair(result.candidates)

        def from_run(pair: corpus.CodePair) -> list[gen_mod.Candidate]:
            got = grouped.get(pair.pair_id)
            if not got:
                raise UnknownProblemError(f"external generator returned nothing for pair {pair.pair_id}")
            return got

        return from_run, config, "external", pair_errors

    if spec.startswith("replay:"):
        path = spec[len("replay:"):]
        grouped = _candidates_by_pair(gen_mod.load_candidates(path))
        counts = {len(bucket) for bucket in grouped.values()}
        n_samples = counts.pop() if len(counts) == 1 else args.n_samples
        config = gen_mod.GeneratorConfig(n_samples, args.temperature, args.max_tokens)

        def from_replay(pair: corpus.CodePair) -> list[gen_mod.Candidate]:
            got = grouped.get(pair.pair_id)
            if not got:
                raise UnknownProblemError(f"replay file has no candidates for pair {pair.pair_id}")
            return got

        return from_replay, config, "replay", pair_errors

    raise MinrepairError(f"unknown generator {spec!r}")


def cmd_generate(args) -> int:
    started = _now()
    pairs = corpus.read_pairs(args.pairs)
    generator, config, model_id, pair_errors = _resolve_generator(args, pairs)
    _print_seed(getattr(args, "seed", 0))
    candidates: list[gen_mod.Candidate] = []
    failed_pairs = {err.pair_id for err in pair_errors}
    for pair in pairs:
        if pair.pair_id in failed_pairs:
            continue
        candidates.extend(generator(pair))
    gen_mod.write_candidates(args.out, candidates)
    inputs = [args.pairs] + ([args.train_pairs] if args.train_pairs else [])
    _write_manifest(args, args.out, inputs, [args.out],
                    seeds={"generate": getattr(args, "seed", 0)}, started_at=started)
    print(f"wrote {len(candidates)} candidates from {model_id}", file=sys.stderr)
    for err in pair_errors:
        print(f"error: pair {err.pair_id}: {err.message}", file=sys.stderr)
    return 1 if pair_errors else 0


# ---------------------------------------------------------------------------
# judging and evaluation
# ---------------------------------------------------------------------------

def cmd_judge_run(args) -> int:
    started = _now()
    pairs = corpus.read_pairs(args.pairs)
    candidates = gen_mod.load_candidates(args.candidates)
    problems = judge_mod.load_problems(_problems_dir(args))
    problems_by_pair = {}
    for pair in pairs:
        problem = problems.get(pair.problem_id)
        if problem is not None:
            problems_by_pair[pair.pair_id] = problem
    entries = judge_mod.judge_batch(candidates, problems_by_pair, jobs=args.jobs)
    judge_mod.write_verdicts(args.out, entries)
    errors = [e for e in entries if e.error is not None]
    for entry in errors:
        print(f"error: pair {entry.candidate.pair_id} sample {entry.candidate.sample_index}: "
              f"{entry.error}", file=sys.stderr)
    print(f"judged {len(entries) - len(errors)} of {len(entries)} candidates", file=sys.stderr)
    _write_manifest(args, args.out, [args.pairs, args.candidates], [args.out], started_at=started)
    return 1 if errors else 0


def _select_members(pairs: list[corpus.CodePair], args) -> list[corpus.CodePair]:
    if not args.split:
        return pairs
    manifest = corpus.read_split_manifest(args.split)
    if args.member == "all":
        return pairs
    wanted = set(manifest[args.member])
    return [p for p in pairs if p.pair_id in wanted]


def cmd_evaluate(args) -> int:
    started = _now()
    all_pairs = corpus.read_pairs(args.pairs)
    pairs = _select_members(all_pairs, args)
    if not pairs:
        raise MinrepairError("no pairs selected for evaluation")
    generator, config, model_id, pair_errors = _resolve_generator(args, pairs)
    if pair_errors:
        for err in pair_errors:
            print(f"error: pair {err.pair_id}: {err.message}", file=sys.stderr)
        raise EvaluationError("external generator reported per-pair errors", [])
    tokenizer_model = bpe.load_model(args.tokenizer)
    preloaded = judge_mod.read_verdicts(args.verdicts) if args.verdicts else None
    problems = {}
    if preloaded is None:
        problems = judge_mod.load_problems(_problems_dir(args))
    _print_seed(args.seed)
    try:
        run = evalreport.evaluate(
            pairs,
            generator,
            problems,
            tokenizer_model,
            model_id=args.model_id or model_id,
            config=config,
            seed=args.seed,
            jobs=args.jobs,
            preloaded_verdicts=preloaded,
        )
    except EvaluationError as exc:
        partial_path = str(args.out) + ".partial.json"
        with open(partial_path, "w", encoding="utf-8") as fh:
            json.dump({"error": str(exc), "completed_pair_ids": exc.completed_pair_ids},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"partial progress written to {partial_path}", file=sys.stderr)
        raise
    evalreport.write_report(args.out, run.report)
    outputs = [args.out]
    if args.fig5:
        evalreport.write_scatter_csv(args.fig5, evalreport.scatter(run.pairs))
        outputs.append(args.fig5)
    if args.fig6:
        grouped = evalreport.group_pass_by_original_ed(run.pairs, args.bucket_width)
        evalreport.write_grouped_csv(args.fig6, grouped)
        outputs.append(args.fig6)
    inputs = [args.pairs, args.tokenizer] + ([args.split] if args.split else [])
    _write_manifest(args, args.out, inputs, outputs,
                    seeds={"evaluate": args.seed}, started_at=started)
    print(evalreport.render_table([run.report]), end="")
    return 0


def cmd_suggest(args) -> int:
    wrong_source = Path(args.wrong).read_text(encoding="utf-8")
    problems = judge_mod.load_problems(_problems_dir(args))
    problem = problems.get(args.problem)
    if problem is None:
        raise MinrepairError(f"unknown problem {args.problem!r}")
    pair_id = "adhoc-" + corpus.pair_id_for(wrong_source, "", args.problem)[:16]

    candidates: list[gen_mod.Candidate] = []
    if args.candidates:
        loaded = gen_mod.load_candidates(args.candidates)
        candidates = [gen_mod.Candidate(pair_id, i, c.source, c.generator_id)
                      for i, c in enumerate(loaded)]
    index = None
    if args.train_pairs:
        index = gen_mod.build_retrieval_index(corpus.read_pairs(args.train_pairs))
    if not candidates and index is not None:
        pseudo = corpus.CodePair(pair_id, args.problem, "adhoc", wrong_source, "", 0)
        candidates = gen_mod.gen_retrieval(pseudo, index)
    if not candidates:
        raise MinrepairError("no candidates: pass --candidates or --train-pairs")

    problems_by_pair = {pair_id: problem}
    entries = judge_mod.judge_batch(candidates, problems_by_pair, jobs=args.jobs)
    judged = [(e.candidate, e.result) for e in entries if e.result is not None]
    try:
        suggestion = suggest_mod.select_minimal(wrong_source, judged)
    except NoCorrectCandidate as exc:
        if args.fallback == "retrieval" and index is not None:
            pseudo = corpus.CodePair(pair_id, args.problem, "adhoc", wrong_source, "", 0)
            fallback_cand = gen_mod.gen_retrieval(pseudo, index)
            fb_entries = judge_mod.judge_batch(fallback_cand, problems_by_pair, jobs=args.jobs)
            fb_judged = [(e.candidate, e.result) for e in fb_entries if e.result is not None]
            suggestion = suggest_mod.select_minimal(wrong_source, fb_judged)
        else:
            print(f"error: {exc}", file=sys.stderr)
            for cand, ed in exc.compilable[:3]:
                print(f"  compilable at ED {ed}: sample {cand.sample_index} "
                      f"({cand.generator_id})", file=sys.stderr)
            return 1
    payload = suggest_mod.suggestion_to_dict(suggestion)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_report_render(args) -> int:
    reports = [evalreport.load_report(path) for path in args.reports]
    print(evalreport.render_table(reports), end="")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_generator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--generator", required=True,
                        help="copy | retrieval | mutate | external:<cmd> | replay:<file>")
    parser.add_argument("--train-pairs", help="pairs file backing the retrieval index")
    parser.add_argument("--n-samples", type=int, default=100)
    parser.add_argument("--temperature", type=float, default=0.7)
    parser.add_argument("--max-tokens", type=int, default=256)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--protocol-timeout", type=float, default=gen_mod.DEFAULT_PROTOCOL_TIMEOUT_S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minrepair",
        description="Mine wrong/correct program pairs, generate repair candidates, "
                    "judge them in a sandbox, and suggest minimal-edit repairs.",
    )
    parser.add_argument("--version", action="version", version=f"minrepair {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # corpus
    p_corpus = subparsers.add_parser("corpus", help="dataset mining and bookkeeping")
    corpus_sub = p_corpus.add_subparsers(dest="subcommand", required=True)

    sp = corpus_sub.add_parser("pair", help="mine wrong->correct pairs from submissions")
    sp.add_argument("--submissions", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_corpus_pair, _subcommand="corpus pair")

    sp = corpus_sub.add_parser("filter", help="drop pairs outside the token-length window")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--tokenizer", required=True)
    sp.add_argument("--max-len", type=int, default=corpus.DEFAULT_MAX_TOKEN_LEN)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_corpus_filter, _subcommand="corpus filter")

    sp = corpus_sub.add_parser("dedupe", help="drop exact duplicate pairs")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_corpus_dedupe, _subcommand="corpus dedupe")

    sp = corpus_sub.add_parser("split", help="seeded train/valid/test split")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ratios", default="0.90,0.05,0.05")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_corpus_split, _subcommand="corpus split")

    sp = corpus_sub.add_parser("stats", help="pair count and edit-distance summary")
    sp.add_argument("--pairs", required=True)
    sp.set_defaults(func=cmd_corpus_stats, _subcommand="corpus stats")

    # tokenizer
    p_tok = subparsers.add_parser("tokenizer", help="train or apply the BPE tokenizer")
    tok_sub = p_tok.add_subparsers(dest="subcommand", required=True)

    sp = tok_sub.add_parser("train", help="train byte-level BPE on a pairs file")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--vocab-size", type=int, default=bpe.DEFAULT_VOCAB_SIZE)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_tokenizer_train, _subcommand="tokenizer train")

    sp = tok_sub.add_parser("encode", help="encode a file (or - for stdin)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_tokenizer_encode, _subcommand="tokenizer encode")

    # generate
    sp = subparsers.add_parser("generate", help="produce repair candidates")
    sp.add_argument("--pairs", required=True)
    _add_generator_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate, _subcommand="generate")

    # judge
    p_judge = subparsers.add_parser("judge", help="sandboxed judging")
    judge_sub = p_judge.add_subparsers(dest="subcommand", required=True)
    sp = judge_sub.add_parser("run", help="judge a candidates file")
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--problems", help=f"problems root (default ${PROBLEMS_ENV})")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_judge_run, _subcommand="judge run")

    # evaluate
    sp = subparsers.add_parser("evaluate", help="full generate->judge->metrics run")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--split", help="split manifest JSON")
    sp.add_argument("--member", choices=("train", "valid", "test", "all"), default="all")
    _add_generator_flags(sp)
    sp.add_argument("--problems", help=f"problems root (default ${PROBLEMS_ENV})")
    sp.add_argument("--tokenizer", required=True)
    sp.add_argument("--verdicts", help="reuse verdicts from a previous judge run")
    sp.add_argument("--model-id", default=None)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--bucket-width", type=int, default=10)
    sp.add_argument("--fig5", help="write per-sample scatter CSV here")
    sp.add_argument("--fig6", help="write bucketed pass CSV here")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate, _subcommand="evaluate")

    # suggest
    sp = subparsers.add_parser("suggest", help="suggest a minimal-edit repair")
    sp.add_argument("--wrong", required=True, help="file holding the wrong program")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--problems", help=f"problems root (default ${PROBLEMS_ENV})")
    sp.add_argument("--candidates", help="candidates JSONL to select from")
    sp.add_argument("--train-pairs", help="pairs file backing retrieval")
    sp.add_argument("--fallback", choices=("retrieval",), default=None)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out", help="write the suggestion JSON here (default stdout)")
    sp.set_defaults(func=cmd_suggest, _subcommand="suggest")

    # report
    p_report = subparsers.add_parser("report", help="render reports")
    report_sub = p_report.add_subparsers(dest="subcommand", required=True)
    sp = report_sub.add_parser("render", help="render report JSONs as a table")
    sp.add_argument("reports", nargs="+")
    sp.set_defaults(func=cmd_report_render, _subcommand="report render")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (MinrepairError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
