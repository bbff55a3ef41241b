"""Pick the passing candidate closest to the wrong program and render it
as a unified-diff-backed suggestion."""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from typing import Sequence

from .errors import NoCorrectCandidate
from .generate import Candidate
from .judge import JudgeResult
from .metrics import edit_distance
from .verdicts import AC, CE


@dataclass(frozen=True)
class Suggestion:
    pair_id: str
    selected: Candidate
    edit_distance: int
    unified_diff: str
    n_candidates: int
    n_correct: int


NO_NEWLINE_MARKER = "\\ No newline at end of file\n"


def render_diff(a: str, b: str, fromfile: str = "a", tofile: str = "b") -> str:
    """Standard unified diff (3 context lines), CRLF-normalized.

    Empty string iff a == b after normalization. A final line without a
    trailing newline is flagged with the conventional marker line so the
    diff stays line-parseable and byte-exact under patching.
    """
    a_lines = a.replace("\r\n", "\n").splitlines(keepends=True)
    b_lines = b.replace("\r\n", "\n").splitlines(keepends=True)
    out = []
    for line in difflib.unified_diff(a_lines, b_lines, fromfile=fromfile, tofile=tofile, n=3):
        if line.endswith("\n"):
            out.append(line)
        else:
            out.append(line + "\n")
            out.append(NO_NEWLINE_MARKER)
    return "".join(out)


def select_minimal(
    wrong_source: str,
    judged: Sequence[tuple[Candidate, JudgeResult]],
) -> Suggestion:
    """Among AC candidates, return the one with the smallest edit distance
    to the wrong program; ties break by (sample_index, generator_id).

    Raises NoCorrectCandidate (carrying the compilable candidates with
    their edit distances, best first) when nothing passed.
    """
    if not judged:
        raise ValueError("judged candidate list must be nonempty")
    pair_id = judged[0][0].pair_id
    correct = [(cand, edit_distance(wrong_source, cand.source))
               for cand, result in judged if result.verdict == AC]
    if not correct:
        compilable = sorted(
            ((cand, edit_distance(wrong_source, cand.source))
             for cand, result in judged if result.verdict != CE),
            key=lambda item: (item[1], item[0].sample_index, item[0].generator_id),
        )
        raise NoCorrectCandidate(pair_id, compilable)
    best, best_ed = min(correct, key=lambda item: (item[1], item[0].sample_index, item[0].generator_id))
    return Suggestion(
        pair_id=pair_id,
        selected=best,
        edit_distance=best_ed,
        unified_diff=render_diff(wrong_source, best.source, fromfile="wrong", tofile="suggested"),
        n_candidates=len(judged),
        n_correct=len(correct),
    )


def suggestion_to_dict(suggestion: Suggestion) -> dict:
    return {
        "pair_id": suggestion.pair_id,
        "source": suggestion.selected.source,
        "edit_distance": suggestion.edit_distance,
        "diff": suggestion.unified_diff,
        "n_candidates": suggestion.n_candidates,
        "n_correct": suggestion.n_correct,
        "generator_id": suggestion.selected.generator_id,
        "sample_index": suggestion.selected.sample_index,
    }
