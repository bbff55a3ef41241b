"""Sandboxed execution of candidate programs against a problem's tests.

Each execution is an isolated child process with its own scratch
directory, a wall-clock limit enforced here, and CPU / address-space /
output-size limits applied inside the child (see _sandbox_runner.py).
Verdicts follow online-judge conventions: AC, WA, RE, TLE, MLE, CE.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from ._jsonl import read_jsonl, require_field, write_jsonl
from .errors import ConfigError, SandboxError
from .generate import Candidate
from .verdicts import AC, CE, MLE, RE, TLE, WA, is_verdict

DEFAULT_TIME_MS = 2000
DEFAULT_MEMORY_KIB = 262144

_RUNNER = os.path.join(os.path.dirname(os.path.abspath(__file__)), "_sandbox_runner.py")

# Candidates never see the parent environment; PYTHONHASHSEED pins hash
# iteration order so judged programs behave identically across runs.
_CHILD_ENV = {
    "PATH": "/usr/local/bin:/usr/bin:/bin",
    "LC_ALL": "C.UTF-8",
    "PYTHONIOENCODING": "utf-8",
    "PYTHONUTF8": "1",
    "PYTHONHASHSEED": "0",
}


@dataclass(frozen=True)
class TestCase:
    input: bytes
    expected_output: bytes


@dataclass(frozen=True)
class ProblemSpec:
    problem_id: str
    test_cases: tuple[TestCase, ...]
    time_limit_ms: int = DEFAULT_TIME_MS
    memory_limit_kib: int = DEFAULT_MEMORY_KIB

    def __post_init__(self):
        if not self.test_cases:
            raise ConfigError(f"problem {self.problem_id}: needs at least one test case")
        if self.time_limit_ms <= 0 or self.memory_limit_kib <= 0:
            raise ConfigError(f"problem {self.problem_id}: limits must be positive")


@dataclass(frozen=True)
class TestExecution:
    verdict: str
    wall_ms: int
    peak_kib: Optional[int]


@dataclass(frozen=True)
class JudgeResult:
    verdict: str
    first_failed_test: Optional[int]  # 1-based ordinal
    per_test: tuple[TestExecution, ...]

    def __post_init__(self):
        if not is_verdict(self.verdict):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == CE and self.per_test:
            raise ValueError("a compile error has no per-test results")
        if self.verdict == AC and any(t.verdict != AC for t in self.per_test):
            raise ValueError("AC requires every executed test to be AC")


def normalize_output(raw: bytes) -> bytes:
    """CRLF -> LF, then strip one trailing newline."""
    out = raw.replace(b"\r\n", b"\n")
    if out.endswith(b"\n"):
        out = out[:-1]
    return out


def outputs_match(expected: bytes, actual: bytes) -> bool:
    return normalize_output(expected) == normalize_output(actual)


def _read_status(path: str) -> Optional[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None


def _spawn(mode: str, source_path: str, status_path: str, time_ms: int, mem_kib: int,
           cwd: str, stdin_file=None, stdout_file=None, stderr_file=None) -> subprocess.Popen:
    argv = [
        sys.executable, "-S", "-s", "-B", _RUNNER,
        mode, source_path, status_path, str(time_ms), str(mem_kib),
    ]
    try:
        return subprocess.Popen(
            argv,
            cwd=cwd,
            env=_CHILD_ENV,
            stdin=stdin_file if stdin_file is not None else subprocess.DEVNULL,
            stdout=stdout_file if stdout_file is not None else subprocess.DEVNULL,
            stderr=stderr_file if stderr_file is not None else subprocess.DEVNULL,
            start_new_session=True,
        )
    except OSError as exc:
        raise SandboxError(f"failed to spawn sandbox child: {exc}") from exc


def _wait_walled(proc: subprocess.Popen, wall_s: float) -> tuple[Optional[int], int]:
    """Wait with a wall-clock budget; returns (returncode or None, wall_ms)."""
    start = time.monotonic()
    try:
        rc = proc.wait(timeout=wall_s)
        return rc, round((time.monotonic() - start) * 1000)
    except subprocess.TimeoutExpired:
        wall_ms = round((time.monotonic() - start) * 1000)
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.wait()
        return None, wall_ms


def check_compilable(source: str, *, time_ms: int = DEFAULT_TIME_MS) -> bool:
    """True iff the Python front end byte-compiles the program.

    No user code runs: the check is a sandboxed parse/compile only, so a
    program that compiles but crashes at runtime still returns True.
    Raises SandboxError if the sandbox itself misbehaves.
    """
    scratch = tempfile.mkdtemp(prefix="minrepair-compile-")
    try:
        source_path = os.path.join(scratch, "main.py")
        status_path = os.path.join(scratch, "status.json")
        with open(source_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(source)
        proc = _spawn("compile", source_path, status_path, time_ms, DEFAULT_MEMORY_KIB, scratch)
        rc, _ = _wait_walled(proc, time_ms / 1000 + 5.0)
        if rc is None:
            # Byte-compilation that blows the time budget counts against
            # the program, not the infrastructure.
            return False
        status = _read_status(status_path)
        if status is None or status.get("outcome") not in ("compilable", "not_compilable"):
            raise SandboxError(f"compile check child failed (exit {rc}, status {status!r})")
        return status["outcome"] == "compilable"
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _run_one_test(scratch: str, source_path: str, case: TestCase, seq: int,
                  time_ms: int, mem_kib: int) -> TestExecution:
    in_path = os.path.join(scratch, f"t{seq}.in")
    out_path = os.path.join(scratch, f"t{seq}.out")
    err_path = os.path.join(scratch, f"t{seq}.err")
    status_path = os.path.join(scratch, f"t{seq}.status.json")
    with open(in_path, "wb") as fh:
        fh.write(case.input)
    with open(in_path, "rb") as stdin_file, \
         open(out_path, "wb") as stdout_file, \
         open(err_path, "wb") as stderr_file:
        proc = _spawn("run", source_path, status_path, time_ms, mem_kib, scratch,
                      stdin_file, stdout_file, stderr_file)
        rc, wall_ms = _wait_walled(proc, time_ms / 1000)
    status = _read_status(status_path)
    peak_kib = status.get("peak_kib") if status else None

    if rc is None:
        return TestExecution(TLE, max(wall_ms, time_ms), peak_kib)
    if status is not None and status.get("outcome") == "mle":
        return TestExecution(MLE, wall_ms, peak_kib)
    if rc < 0:
        verdict = TLE if -rc == signal.SIGXCPU else RE
        return TestExecution(verdict, wall_ms, peak_kib)
    if rc != 0:
        return TestExecution(RE, wall_ms, peak_kib)
    with open(out_path, "rb") as fh:
        actual = fh.read()
    verdict = AC if outputs_match(case.expected_output, actual) else WA
    return TestExecution(verdict, wall_ms, peak_kib)


def judge(source: str, problem: ProblemSpec) -> JudgeResult:
    """Judge one program: compile gate, then tests in order.

    Execution stops at the first failing test; per_test records every
    test that actually ran. The overall verdict is the first non-AC
    per-test verdict, or AC.
    """
    if not check_compilable(source, time_ms=problem.time_limit_ms):
        return JudgeResult(CE, None, ())
    scratch = tempfile.mkdtemp(prefix="minrepair-judge-")
    try:
        source_path = os.path.join(scratch, "main.py")
        with open(source_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(source)
        executed: list[TestExecution] = []
        first_failed = None
        for seq, case in enumerate(problem.test_cases, start=1):
            execution = _run_one_test(scratch, source_path, case, seq,
                                      problem.time_limit_ms, problem.memory_limit_kib)
            executed.append(execution)
            if execution.verdict != AC:
                first_failed = seq
                break
        overall = executed[first_failed - 1].verdict if first_failed else AC
        return JudgeResult(overall, first_failed, tuple(executed))
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


# ---------------------------------------------------------------------------
# Batch judging with a shared result cache
# ---------------------------------------------------------------------------

class JudgeCache:
    """(problem_id, source hash) -> JudgeResult; thread-safe."""

    def __init__(self):
        self._results: dict[tuple[str, str], JudgeResult] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(problem_id: str, source: str) -> tuple[str, str]:
        return problem_id, hashlib.sha256(source.encode("utf-8")).hexdigest()

    def get(self, key) -> Optional[JudgeResult]:
        with self._lock:
            result = self._results.get(key)
            if result is None:
                self.misses += 1
            else:
                self.hits += 1
            return result

    def put(self, key, result: JudgeResult) -> None:
        with self._lock:
            self._results[key] = result


@dataclass(frozen=True)
class BatchEntry:
    candidate: Candidate
    result: Optional[JudgeResult]
    error: Optional[str]


def judge_batch(
    candidates: Sequence[Candidate],
    problems_by_pair: Mapping[str, ProblemSpec],
    *,
    jobs: Optional[int] = None,
    cache: Optional[JudgeCache] = None,
) -> list[BatchEntry]:
    """Judge candidates with a bounded worker pool.

    Identical (problem, source) pairs execute once; results come back in
    candidate order regardless of scheduling. A candidate whose pair has
    no known problem yields an error entry and the batch continues.
    """
    if cache is None:
        cache = JudgeCache()
    resolved: list[tuple[Candidate, Optional[ProblemSpec], Optional[str]]] = []
    todo: dict[tuple[str, str], tuple[str, ProblemSpec]] = {}
    for cand in candidates:
        problem = problems_by_pair.get(cand.pair_id)
        if problem is None:
            resolved.append((cand, None, f"unknown problem for pair {cand.pair_id}"))
            continue
        resolved.append((cand, problem, None))
        key = JudgeCache.key(problem.problem_id, cand.source)
        if cache.get(key) is None and key not in todo:
            todo[key] = (cand.source, problem)

    if todo:
        workers = max(1, jobs if jobs is not None else (os.cpu_count() or 1))

        def run(item):
            key, (source, problem) = item
            return key, judge(source, problem)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, result in pool.map(run, sorted(todo.items())):
                cache.put(key, result)

    entries = []
    for cand, problem, error in resolved:
        if error is not None:
            entries.append(BatchEntry(cand, None, error))
        else:
            result = cache.get(JudgeCache.key(problem.problem_id, cand.source))
            if result is None:
                raise SandboxError(f"no judge result for candidate of pair {cand.pair_id}")
            entries.append(BatchEntry(cand, result, None))
    return entries


# ---------------------------------------------------------------------------
# Problem directory layout and verdict files
# ---------------------------------------------------------------------------

def load_problem(problem_dir: str | Path) -> ProblemSpec:
    """problems/<id>/tests/<NN>.in + <NN>.out, optional limits.json."""
    problem_dir = Path(problem_dir)
    tests_dir = problem_dir / "tests"
    if not tests_dir.is_dir():
        raise ConfigError(f"{problem_dir}: missing tests/ directory")
    cases = []
    for in_path in sorted(tests_dir.glob("*.in")):
        out_path = in_path.with_suffix(".out")
        if not out_path.exists():
            raise ConfigError(f"{in_path}: missing expected-output file {out_path.name}")
        cases.append(TestCase(in_path.read_bytes(), out_path.read_bytes()))
    if not cases:
        raise ConfigError(f"{problem_dir}: no test cases found")
    time_ms, mem_kib = DEFAULT_TIME_MS, DEFAULT_MEMORY_KIB
    limits_path = problem_dir / "limits.json"
    if limits_path.exists():
        try:
            limits = json.loads(limits_path.read_text(encoding="utf-8"))
            time_ms = int(limits.get("time_ms", time_ms))
            mem_kib = int(limits.get("memory_kib", mem_kib))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{limits_path}: malformed limits file: {exc}") from exc
    return ProblemSpec(problem_dir.name, tuple(cases), time_ms, mem_kib)


def load_problems(root: str | Path) -> dict[str, ProblemSpec]:
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"problems root {root} is not a directory")
    problems = {}
    for child in sorted(root.iterdir()):
        if child.is_dir() and (child / "tests").is_dir():
            problems[child.name] = load_problem(child)
    if not problems:
        raise ConfigError(f"problems root {root} contains no problems")
    return problems


def write_verdicts(path: str | Path, entries: Iterable[BatchEntry]) -> None:
    """One line per judged candidate; wall_ms summed, peak_kib maxed over tests."""
    rows = []
    for entry in entries:
        if entry.result is None:
            continue
        result = entry.result
        peaks = [t.peak_kib for t in result.per_test if t.peak_kib is not None]
        rows.append(
            {
                "pair_id": entry.candidate.pair_id,
                "sample_index": entry.candidate.sample_index,
                "verdict": result.verdict,
                "first_failed_test": result.first_failed_test,
                "wall_ms": sum(t.wall_ms for t in result.per_test),
                "peak_kib": max(peaks) if peaks else None,
            }
        )
    write_jsonl(path, rows)


def read_verdicts(path: str | Path) -> dict[tuple[str, int], str]:
    """(pair_id, sample_index) -> verdict, for cached re-evaluation."""
    verdicts: dict[tuple[str, int], str] = {}
    for line_no, obj in read_jsonl(path):
        pair_id = require_field(obj, "pair_id", str, str(path), line_no)
        sample_index = require_field(obj, "sample_index", int, str(path), line_no)
        verdict = require_field(obj, "verdict", str, str(path), line_no)
        if not is_verdict(verdict):
            raise ConfigError(f"{path}:{line_no}: unknown verdict {verdict!r}")
        verdicts[(pair_id, sample_index)] = verdict
    return verdicts
