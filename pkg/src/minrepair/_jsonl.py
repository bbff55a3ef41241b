"""Line-delimited JSON helpers with line-number error reporting."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import IngestError


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, object) for every non-blank line; 1-based line numbers."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(str(path), line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise IngestError(str(path), line_no, "expected a JSON object")
            yield line_no, obj


def write_jsonl(path: str | Path, objs: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def require_field(obj: dict, key: str, types, path: str, line_no: int) -> Any:
    if key not in obj:
        raise IngestError(path, line_no, f"missing field {key!r}")
    value = obj[key]
    bad = not isinstance(value, types)
    if types is int and isinstance(value, bool):
        bad = True  # bool is an int subclass; never a valid count/index
    if bad:
        want = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise IngestError(path, line_no, f"field {key!r} must be {want}")
    return value
