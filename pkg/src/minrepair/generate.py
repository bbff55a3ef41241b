"""Repair-candidate generators.

Two naive baselines (copy the wrong program; retrieve the closest
training correct program), a seeded mutation generator for harness
testing, a line-delimited JSON protocol for external model-backed
generators, and replay files.
"""

from __future__ import annotations

import json
import queue
import random
import shlex
import string
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ._jsonl import read_jsonl, require_field, write_jsonl
from .corpus import CodePair
from .errors import ExternalGeneratorError, IngestError, UnknownProblemError
from .metrics import edit_distance

DEFAULT_PROTOCOL_TIMEOUT_S = 120.0

_EDIT_ALPHABET = string.ascii_letters + string.digits + string.punctuation + " \n"


@dataclass(frozen=True)
class Candidate:
    """One generated repair sample for one pair."""

    pair_id: str
    sample_index: int
    source: str
    generator_id: str


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int = 100
    temperature: float = 0.7
    max_tokens: int = 256

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class RetrievalIndex:
    """Per problem: distinct correct training sources in first-seen order."""

    by_problem: dict[str, tuple[str, ...]]


def gen_copy(pair: CodePair) -> list[Candidate]:
    """The input program, verbatim, as the single candidate."""
    return [Candidate(pair.pair_id, 0, pair.wrong_source, "copy")]


def build_retrieval_index(train_pairs: Iterable[CodePair]) -> RetrievalIndex:
    by_problem: dict[str, list[str]] = {}
    seen: dict[str, set[str]] = {}
    for pair in train_pairs:
        bucket = by_problem.setdefault(pair.problem_id, [])
        known = seen.setdefault(pair.problem_id, set())
        if pair.correct_source not in known:
            known.add(pair.correct_source)
            bucket.append(pair.correct_source)
    return RetrievalIndex({pid: tuple(sources) for pid, sources in by_problem.items()})


def gen_retrieval(pair: CodePair, index: RetrievalIndex) -> list[Candidate]:
    """Linear search for the indexed program with the smallest edit
    distance to the wrong program; ties go to the earliest index entry."""
    sources = index.by_problem.get(pair.problem_id)
    if not sources:
        raise UnknownProblemError(
            f"retrieval index has no programs for problem {pair.problem_id}"
        )
    best = min(sources, key=lambda s: edit_distance(pair.wrong_source, s))
    return [Candidate(pair.pair_id, 0, best, "retrieval")]


def _mutate_text(text: str, rng: random.Random, max_edits: int = 3) -> str:
    chars = list(text)
    for _ in range(rng.randint(0, max_edits)):
        op = rng.choice(("insert", "delete", "replace"))
        if op == "insert" or not chars:
            chars.insert(rng.randrange(len(chars) + 1), rng.choice(_EDIT_ALPHABET))
        elif op == "delete":
            del chars[rng.randrange(len(chars))]
        else:
            chars[rng.randrange(len(chars))] = rng.choice(_EDIT_ALPHABET)
    return "".join(chars)


def gen_mutate(pair: CodePair, config: GeneratorConfig, seed: int) -> list[Candidate]:
    """n_samples perturbations of the correct program, 0..3 single-character
    edits each; sample 0 is always the unmodified correct program so a
    mini-corpus run has at least one passing candidate. Deterministic for
    a fixed (pair, config, seed), independent of call order."""
    rng = random.Random(f"{seed}:{pair.pair_id}")
    candidates = [Candidate(pair.pair_id, 0, pair.correct_source, "mutate")]
    for i in range(1, config.n_samples):
        candidates.append(
            Candidate(pair.pair_id, i, _mutate_text(pair.correct_source, rng), "mutate")
        )
    return candidates


# ---------------------------------------------------------------------------
# External generator protocol (line-delimited JSON over the child's stdio)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairError:
    pair_id: str
    message: str


@dataclass(frozen=True)
class ExternalRunResult:
    candidates: list[Candidate]
    errors: list[PairError]


class _LineReader:
    """Background reader so protocol waits can time out cleanly."""

    def __init__(self, stream):
        self._queue: queue.Queue = queue.Queue()

        def pump():
            for line in stream:
                self._queue.put(line)
            self._queue.put(None)

        self._thread = threading.Thread(target=pump, daemon=True)
        self._thread.start()

    def readline(self, timeout: float) -> Optional[str]:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError


def run_external(
    command: str | Sequence[str],
    pairs: Sequence[CodePair],
    config: GeneratorConfig,
    *,
    generator_id: str = "external",
    timeout_s: float = DEFAULT_PROTOCOL_TIMEOUT_S,
) -> ExternalRunResult:
    """Drive an external generator process over the line protocol.

    Per pair, sends one generate request and expects exactly
    config.n_samples candidate lines (sample_index 0..n-1, in order)
    followed by a done line. A well-framed error line, or a done line
    arriving early, records a per-pair error and the run continues.
    Malformed framing, timeouts, or a nonzero exit raise
    ExternalGeneratorError naming the offending pair.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    proc = subprocess.Popen(
        argv,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    candidates: list[Candidate] = []
    errors: list[PairError] = []
    try:
        reader = _LineReader(proc.stdout)
        for pair in pairs:
            request = {
                "type": "generate",
                "pair_id": pair.pair_id,
                "wrong": pair.wrong_source,
                "n_samples": config.n_samples,
                "temperature": config.temperature,
                "max_tokens": config.max_tokens,
            }
            try:
                proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ExternalGeneratorError(pair.pair_id, f"generator pipe closed: {exc}")
            collected: list[Candidate] = []
            failed = False
            while True:
                try:
                    line = reader.readline(timeout_s)
                except TimeoutError:
                    proc.kill()
                    raise ExternalGeneratorError(pair.pair_id, f"no response within {timeout_s}s")
                if line is None:
                    raise ExternalGeneratorError(pair.pair_id, "generator closed its output mid-pair")
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ExternalGeneratorError(pair.pair_id, f"malformed line: {exc.msg}")
                kind = msg.get("type")
                if kind == "candidate":
                    if msg.get("pair_id") != pair.pair_id:
                        raise ExternalGeneratorError(pair.pair_id, f"candidate for wrong pair {msg.get('pair_id')!r}")
                    if msg.get("sample_index") != len(collected):
                        raise ExternalGeneratorError(pair.pair_id, f"expected sample_index {len(collected)}, got {msg.get('sample_index')!r}")
                    source = msg.get("source")
                    if not isinstance(source, str):
                        raise ExternalGeneratorError(pair.pair_id, "candidate source must be a string")
                    if len(collected) >= config.n_samples:
                        raise ExternalGeneratorError(pair.pair_id, f"more than {config.n_samples} candidates")
                    collected.append(Candidate(pair.pair_id, len(collected), source, generator_id))
                elif kind == "done":
                    if msg.get("pair_id") != pair.pair_id:
                        raise ExternalGeneratorError(pair.pair_id, f"done for wrong pair {msg.get('pair_id')!r}")
                    if not failed and len(collected) != config.n_samples:
                        errors.append(PairError(
                            pair.pair_id,
                            f"expected {config.n_samples} candidates, got {len(collected)}",
                        ))
                        failed = True
                    break
                elif kind == "error":
                    errors.append(PairError(pair.pair_id, str(msg.get("message", "generator error"))))
                    failed = True
                    # The generator still terminates the pair with done.
                else:
                    raise ExternalGeneratorError(pair.pair_id, f"unknown message type {kind!r}")
            if not failed:
                candidates.extend(collected)
        proc.stdin.close()
        rc = proc.wait(timeout=timeout_s)
        if rc != 0:
            raise ExternalGeneratorError(None, f"generator exited with code {rc}")
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
    return ExternalRunResult(candidates, errors)


# ---------------------------------------------------------------------------
# Candidate replay files
# ---------------------------------------------------------------------------

def write_candidates(path: str | Path, candidates: Iterable[Candidate]) -> None:
    write_jsonl(
        path,
        (
            {
                "pair_id": c.pair_id,
                "sample_index": c.sample_index,
                "source": c.source,
                "generator_id": c.generator_id,
            }
            for c in candidates
        ),
    )


def load_candidates(path: str | Path) -> list[Candidate]:
    """Parse a candidates JSONL file, preserving order.

    Raises IngestError (with the line number) on schema violations,
    including duplicate (pair_id, sample_index, generator_id) keys.
    """
    candidates = []
    seen: set[tuple[str, int, str]] = set()
    for line_no, obj in read_jsonl(path):
        pair_id = require_field(obj, "pair_id", str, str(path), line_no)
        sample_index = require_field(obj, "sample_index", int, str(path), line_no)
        source = require_field(obj, "source", str, str(path), line_no)
        generator_id = require_field(obj, "generator_id", str, str(path), line_no)
        if sample_index < 0:
            raise IngestError(str(path), line_no, "sample_index must be >= 0")
        key = (pair_id, sample_index, generator_id)
        if key in seen:
            raise IngestError(str(path), line_no, f"duplicate candidate {key!r}")
        seen.add(key)
        candidates.append(Candidate(pair_id, sample_index, source, generator_id))
    return candidates
