"""Secondary acceptance: the adapter, run against the mini corpus with a
tiny random-weights checkpoint, emits exactly n_samples candidates per
pair, every line parses through the harness loader, and a full
EvalReport comes out without protocol errors. Verdict quality is
deliberately not asserted. All coupling to the harness goes through its
CLI and file formats.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

HARNESS_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"
SUBMISSIONS = HARNESS_FIXTURES / "submissions_30.jsonl"
PROBLEMS = HARNESS_FIXTURES / "problems"

N_SAMPLES = 3


def run(argv, timeout=300):
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    assert proc.returncode == 0, f"{argv}\nstdout: {proc.stdout}\nstderr: {proc.stderr}"
    return proc


def harness(*args):
    return run([sys.executable, "-m", "minrepair.cli", *args])


def adapter(*args):
    return run([sys.executable, "-m", "minrepair_adapter.cli", *args])


def test_protocol_conformance_end_to_end(tiny_checkpoint, tmp_path):
    start = time.monotonic()
    pairs_raw = tmp_path / "pairs_raw.jsonl"
    tok = tmp_path / "tok.json"
    pairs_f = tmp_path / "pairs_f.jsonl"
    pairs = tmp_path / "pairs.jsonl"
    harness("corpus", "pair", "--submissions", str(SUBMISSIONS), "--out", str(pairs_raw))
    harness("tokenizer", "train", "--pairs", str(pairs_raw), "--vocab-size", "300",
            "--out", str(tok))
    harness("corpus", "filter", "--pairs", str(pairs_raw), "--tokenizer", str(tok),
            "--out", str(pairs_f))
    harness("corpus", "dedupe", "--pairs", str(pairs_f), "--out", str(pairs))
    n_pairs = len(pairs.read_text().splitlines())
    assert n_pairs >= 10

    # Batch export: exactly n_samples lines per pair.
    cands = tmp_path / "cands.jsonl"
    adapter("export", "--checkpoint", tiny_checkpoint, "--pairs", str(pairs),
            "--out", str(cands), "--n-samples", str(N_SAMPLES),
            "--max-tokens", "8", "--seed", "5")
    rows = [json.loads(l) for l in cands.read_text().splitlines()]
    assert len(rows) == N_SAMPLES * n_pairs
    per_pair = {}
    for row in rows:
        per_pair.setdefault(row["pair_id"], []).append(row["sample_index"])
    assert len(per_pair) == n_pairs
    assert all(indices == list(range(N_SAMPLES)) for indices in per_pair.values())

    # The harness parses every line (replay goes through its candidates
    # loader) and produces a report without protocol errors.
    report_path = tmp_path / "report_replay.json"
    harness("evaluate", "--pairs", str(pairs), "--generator", f"replay:{cands}",
            "--problems", str(PROBLEMS), "--tokenizer", str(tok),
            "--model-id", "adapter-tiny", "--out", str(report_path))
    report = json.loads(report_path.read_text())
    assert report["n_pairs"] == n_pairs
    assert report["n_samples_per_pair"] == N_SAMPLES
    assert report["model_id"] == "adapter-tiny"

    # Live protocol: the harness drives the server as an external generator.
    serve_cmd = (f"{sys.executable} -m minrepair_adapter.cli serve "
                 f"--checkpoint {tiny_checkpoint} --seed 5")
    report_live = tmp_path / "report_live.json"
    harness("evaluate", "--pairs", str(pairs), "--generator", f"external:{serve_cmd}",
            "--n-samples", str(N_SAMPLES), "--max-tokens", "8",
            "--problems", str(PROBLEMS), "--tokenizer", str(tok),
            "--model-id", "adapter-tiny-live", "--out", str(report_live))
    live = json.loads(report_live.read_text())
    assert live["n_pairs"] == n_pairs
    assert live["n_samples_per_pair"] == N_SAMPLES

    print(f"\n[ACCEPTANCE] adapter protocol conformance "
          f"({n_pairs} pairs x {N_SAMPLES} samples, replay + live serve, "
          f"{time.monotonic() - start:.1f}s): PASS")
