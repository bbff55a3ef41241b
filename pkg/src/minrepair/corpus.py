"""Submission-log mining.

Pairs every wrong attempt with the next accepted submission by the same
user on the same problem, then filters by token length, deduplicates,
and splits into train/valid/test.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import tokenizer as bpe
from ._jsonl import read_jsonl, require_field, write_jsonl
from .errors import IngestError, MinrepairError
from .metrics import edit_distance
from .verdicts import AC, is_verdict

DEFAULT_MAX_TOKEN_LEN = 256
DEFAULT_SPLIT_RATIOS = (0.90, 0.05, 0.05)


@dataclass(frozen=True)
class SubmissionRecord:
    """One judged submission. submitted_at is epoch milliseconds."""

    user_id: str
    problem_id: str
    submitted_at: int
    verdict: str
    source: str

    def __post_init__(self):
        if not is_verdict(self.verdict):
            raise ValueError(f"unknown verdict {self.verdict!r}")


@dataclass(frozen=True)
class CodePair:
    """A (wrong, correct) same-user pair for one problem; the dataset unit."""

    pair_id: str
    problem_id: str
    user_id: str
    wrong_source: str
    correct_source: str
    original_ed: int


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[CodePair, ...]
    valid: tuple[CodePair, ...]
    test: tuple[CodePair, ...]
    seed: int


@dataclass(frozen=True)
class CorpusStats:
    count: int
    mean_ed: Optional[float]
    std_ed: Optional[float]


def pair_id_for(wrong_source: str, correct_source: str, problem_id: str) -> str:
    """Content hash of (wrong, correct, problem_id), length-framed."""
    h = hashlib.sha256()
    for part in (wrong_source, correct_source, problem_id):
        raw = part.encode("utf-8")
        h.update(len(raw).to_bytes(8, "little"))
        h.update(raw)
    return h.hexdigest()


def make_pair(problem_id: str, user_id: str, wrong_source: str, correct_source: str) -> CodePair:
    return CodePair(
        pair_id=pair_id_for(wrong_source, correct_source, problem_id),
        problem_id=problem_id,
        user_id=user_id,
        wrong_source=wrong_source,
        correct_source=correct_source,
        original_ed=edit_distance(wrong_source, correct_source),
    )


def pair_submissions(records: Sequence[SubmissionRecord]) -> list[CodePair]:
    """Mine wrong->correct pairs from (possibly interleaved) submissions.

    Per (user, problem) stream ordered by submitted_at (input order breaks
    ties), every non-AC submission is paired with the next AC submission;
    many wrongs may map to one correct. Wrongs with no later AC, and ACs
    with no pending wrong, yield nothing. Output is sorted by (user_id,
    problem_id, wrong submitted_at) and is deterministic.
    """
    streams: dict[tuple[str, str], list[tuple[int, int, SubmissionRecord]]] = defaultdict(list)
    for idx, rec in enumerate(records):
        streams[(rec.user_id, rec.problem_id)].append((rec.submitted_at, idx, rec))

    pairs: list[CodePair] = []
    for (user_id, problem_id) in sorted(streams):
        stream = sorted(streams[(user_id, problem_id)], key=lambda item: (item[0], item[1]))
        pending: list[SubmissionRecord] = []
        for _, _, rec in stream:
            if rec.verdict == AC:
                for wrong in pending:
                    pairs.append(make_pair(problem_id, user_id, wrong.source, rec.source))
                pending.clear()
            else:
                pending.append(rec)
    return pairs


def filter_pairs(
    pairs: Iterable[CodePair],
    model: bpe.TokenizerModel,
    max_len: int = DEFAULT_MAX_TOKEN_LEN,
) -> list[CodePair]:
    """Keep pairs whose wrong AND correct token counts are in (0, max_len)."""
    kept = []
    for pair in pairs:
        n_wrong = bpe.token_count(model, pair.wrong_source)
        if not 0 < n_wrong < max_len:
            continue
        n_correct = bpe.token_count(model, pair.correct_source)
        if not 0 < n_correct < max_len:
            continue
        kept.append(pair)
    return kept


def dedupe_pairs(pairs: Iterable[CodePair]) -> list[CodePair]:
    """Collapse exact (wrong, correct, problem_id) duplicates to the first."""
    seen: set[tuple[str, str, str]] = set()
    out = []
    for pair in pairs:
        key = (pair.wrong_source, pair.correct_source, pair.problem_id)
        if key in seen:
            continue
        seen.add(key)
        out.append(pair)
    return out


def split_pairs(
    pairs: Sequence[CodePair],
    seed: int,
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
) -> CorpusSplit:
    """Seeded shuffle, then round(N*ratio) for test and valid, rest train."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise MinrepairError(f"split ratios must sum to 1.0, got {ratios}")
    n = len(pairs)
    if n < 3:
        raise MinrepairError(f"cannot populate all splits with {n} pair(s)")
    n_test = round(n * ratios[2])
    n_valid = round(n * ratios[1])
    n_train = n - n_valid - n_test
    if n_train < 0:
        raise MinrepairError(f"ratios {ratios} leave no room for a train split of {n} pairs")
    shuffled = list(pairs)
    random.Random(seed).shuffle(shuffled)
    return CorpusSplit(
        train=tuple(shuffled[:n_train]),
        valid=tuple(shuffled[n_train : n_train + n_valid]),
        test=tuple(shuffled[n_train + n_valid :]),
        seed=seed,
    )


def corpus_stats(pairs: Sequence[CodePair]) -> CorpusStats:
    """Count plus mean/population-std of original_ed; None markers if empty."""
    if not pairs:
        return CorpusStats(0, None, None)
    eds = [p.original_ed for p in pairs]
    mean = math.fsum(eds) / len(eds)
    var = math.fsum((e - mean) ** 2 for e in eds) / len(eds)
    return CorpusStats(len(eds), mean, math.sqrt(var))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _parse_timestamp_ms(value: str) -> int:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round(dt.timestamp() * 1000)


def _require_utf8(value: str, field: str, path: str, line_no: int) -> str:
    try:
        value.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise IngestError(path, line_no, f"field {field!r} is not valid UTF-8 text: {exc}") from exc
    return value


def read_submissions(path: str | Path) -> list[SubmissionRecord]:
    """Parse a submissions JSONL file; raises IngestError with line numbers."""
    records = []
    for line_no, obj in read_jsonl(path):
        user_id = require_field(obj, "user_id", str, str(path), line_no)
        problem_id = require_field(obj, "problem_id", str, str(path), line_no)
        raw_ts = require_field(obj, "submitted_at", str, str(path), line_no)
        verdict = require_field(obj, "verdict", str, str(path), line_no)
        source = require_field(obj, "source", str, str(path), line_no)
        if not is_verdict(verdict):
            raise IngestError(str(path), line_no, f"unknown verdict {verdict!r}")
        _require_utf8(source, "source", str(path), line_no)
        try:
            ts = _parse_timestamp_ms(raw_ts)
        except ValueError as exc:
            raise IngestError(str(path), line_no, f"bad submitted_at {raw_ts!r}: {exc}") from exc
        records.append(SubmissionRecord(user_id, problem_id, ts, verdict, source))
    return records


def write_pairs(path: str | Path, pairs: Iterable[CodePair]) -> None:
    write_jsonl(
        path,
        (
            {
                "pair_id": p.pair_id,
                "problem_id": p.problem_id,
                "user_id": p.user_id,
                "wrong": p.wrong_source,
                "correct": p.correct_source,
                "original_ed": p.original_ed,
            }
            for p in pairs
        ),
    )


def read_pairs(path: str | Path) -> list[CodePair]:
    pairs = []
    for line_no, obj in read_jsonl(path):
        pair = CodePair(
            pair_id=require_field(obj, "pair_id", str, str(path), line_no),
            problem_id=require_field(obj, "problem_id", str, str(path), line_no),
            user_id=require_field(obj, "user_id", str, str(path), line_no),
            wrong_source=require_field(obj, "wrong", str, str(path), line_no),
            correct_source=require_field(obj, "correct", str, str(path), line_no),
            original_ed=require_field(obj, "original_ed", int, str(path), line_no),
        )
        if pair.original_ed < 0:
            raise IngestError(str(path), line_no, "original_ed must be >= 0")
        pairs.append(pair)
    return pairs


def write_split_manifest(path: str | Path, split: CorpusSplit) -> None:
    import json

    manifest = {
        "seed": split.seed,
        "train": [p.pair_id for p in split.train],
        "valid": [p.pair_id for p in split.valid],
        "test": [p.pair_id for p in split.test],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_split_manifest(path: str | Path) -> dict:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("seed", "train", "valid", "test"):
        if key not in manifest:
            raise MinrepairError(f"{path}: split manifest missing {key!r}")
    return manifest
