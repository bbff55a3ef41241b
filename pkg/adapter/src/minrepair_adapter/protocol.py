"""Generator-protocol server and batch export.

Wire format (one JSON object per line):
  request   {"type": "generate", "pair_id", "wrong", "n_samples",
             "temperature", "max_tokens"}
  response  n_samples x {"type": "candidate", "pair_id", "sample_index",
             "source"} then {"type": "done", "pair_id"}
  failure   {"type": "error", "pair_id", "message"} then the done line;
            the server stays up for the next request.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .sampler import AdapterConfig, CandidateSampler


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
    sys.stdout.flush()


def serve(config: AdapterConfig, stdin=None) -> int:
    """Answer generate requests until stdin closes.

    A checkpoint that fails to load exits nonzero before any request is
    read; a generation failure for one request emits an error line and
    the server keeps going.
    """
    try:
        sampler = CandidateSampler(config)
    except Exception as exc:
        print(f"error: cannot load checkpoint {config.checkpoint!r}: {exc}", file=sys.stderr)
        return 1
    stream = stdin if stdin is not None else sys.stdin
    for line in stream:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"error: malformed request line: {exc.msg}", file=sys.stderr)
            return 1
        if request.get("type") != "generate":
            print(f"error: unknown request type {request.get('type')!r}", file=sys.stderr)
            return 1
        pair_id = request.get("pair_id", "")
        try:
            sources = sampler.sample(
                pair_id,
                request["wrong"],
                n_samples=request.get("n_samples"),
                temperature=request.get("temperature"),
                max_tokens=request.get("max_tokens"),
            )
            for index, source in enumerate(sources):
                _emit({"type": "candidate", "pair_id": pair_id,
                       "sample_index": index, "source": source})
        except Exception as exc:
            _emit({"type": "error", "pair_id": pair_id, "message": str(exc)})
        _emit({"type": "done", "pair_id": pair_id})
    return 0


def export_candidates(pairs_path: str | Path, config: AdapterConfig,
                      out_path: str | Path) -> int:
    """Batch mode: sample every pair in a pairs JSONL file and write the
    replay candidates file the harness loads."""
    sampler = CandidateSampler(config)
    generator_id = f"adapter:{Path(config.checkpoint).name}"
    written = 0
    with open(pairs_path, "r", encoding="utf-8") as pairs_file, \
         open(out_path, "w", encoding="utf-8") as out_file:
        for line in pairs_file:
            if not line.strip():
                continue
            pair = json.loads(line)
            sources = sampler.sample(pair["pair_id"], pair["wrong"])
            for index, source in enumerate(sources):
                out_file.write(json.dumps({
                    "pair_id": pair["pair_id"],
                    "sample_index": index,
                    "source": source,
                    "generator_id": generator_id,
                }, ensure_ascii=False) + "\n")
                written += 1
    print(f"wrote {written} candidates to {out_path}", file=sys.stderr)
    return 0
