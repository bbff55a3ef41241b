"""Byte-pair-encoding tokenizer trained on a program corpus.

Supplies the deterministic token counts behind the corpus length filter
and the token sequences behind BLEU. Byte-level: losslessly round-trips
any byte string, UTF-8 or not.
"""

from __future__ import annotations

import base64
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MinrepairError

DEFAULT_VOCAB_SIZE = 8192

# (left index, right index, merged index)
Merge = tuple[int, int, int]


class TokenizerError(MinrepairError):
    pass


@dataclass(frozen=True)
class TokenizerModel:
    """Immutable trained model; safe to share across threads."""

    vocab: tuple[bytes, ...]
    merges: tuple[Merge, ...]

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)


def _as_bytes(text: str | bytes) -> bytes:
    return text.encode("utf-8") if isinstance(text, str) else bytes(text)


def _merge_sequence(seq: list[int], left: int, right: int, merged: int) -> list[int]:
    # Left-to-right, non-overlapping.
    out = []
    i = 0
    n = len(seq)
    while i < n:
        if seq[i] == left and i + 1 < n and seq[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def train_bpe(texts: Iterable[str | bytes], vocab_size: int = DEFAULT_VOCAB_SIZE) -> TokenizerModel:
    """Greedy byte-level BPE.

    Starts from the 256 single-byte tokens and repeatedly merges the most
    frequent adjacent token pair (ties broken lexicographically by the
    pair's byte strings) until vocab_size is reached or no pair occurs
    twice. Deterministic for a fixed input order.
    """
    if vocab_size < 256:
        raise TokenizerError(f"vocab_size must be >= 256, got {vocab_size}")
    corpus = [list(_as_bytes(t)) for t in texts]
    if not corpus:
        raise TokenizerError("cannot train on an empty corpus")
    vocab: list[bytes] = [bytes([i]) for i in range(256)]
    merges: list[Merge] = []
    while len(vocab) < vocab_size:
        counts: Counter[tuple[int, int]] = Counter()
        for seq in corpus:
            counts.update(zip(seq, seq[1:]))
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        left, right = min(
            (pair for pair, count in counts.items() if count == best_count),
            key=lambda pair: (vocab[pair[0]], vocab[pair[1]]),
        )
        merged = len(vocab)
        vocab.append(vocab[left] + vocab[right])
        merges.append((left, right, merged))
        corpus = [_merge_sequence(seq, left, right, merged) for seq in corpus]
    return TokenizerModel(tuple(vocab), tuple(merges))


def encode(model: TokenizerModel, text: str | bytes) -> list[int]:
    """Token ids for text, applying merges in training order."""
    data = _as_bytes(text)
    seq = list(data)
    vocab = model.vocab
    for left, right, merged in model.merges:
        # Tokens always partition the original bytes, so the pair can only
        # be adjacent somewhere if its concatenation occurs as a substring.
        if vocab[merged] not in data:
            continue
        seq = _merge_sequence(seq, left, right, merged)
    return seq


def decode_bytes(model: TokenizerModel, tokens: Sequence[int]) -> bytes:
    """Concatenated token byte strings; raises on out-of-range ids."""
    vocab = model.vocab
    size = len(vocab)
    parts = []
    for t in tokens:
        if not 0 <= t < size:
            raise TokenizerError(f"token id {t} out of range for vocab of {size}")
        parts.append(vocab[t])
    return b"".join(parts)


def decode(model: TokenizerModel, tokens: Sequence[int]) -> str:
    return decode_bytes(model, tokens).decode("utf-8")


def token_count(model: TokenizerModel, text: str | bytes) -> int:
    return len(encode(model, text))


def save_model(model: TokenizerModel, path: str | Path) -> None:
    payload = {
        "vocab": [base64.b64encode(tok).decode("ascii") for tok in model.vocab],
        "merges": [list(m) for m in model.merges],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path: str | Path) -> TokenizerModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        vocab = tuple(base64.b64decode(tok, validate=True) for tok in payload["vocab"])
        merges = tuple((int(i), int(j), int(k)) for i, j, k in payload["merges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TokenizerError(f"{path}: malformed tokenizer model: {exc}") from exc
    if len(vocab) < 256 or any(vocab[i] != bytes([i]) for i in range(256)):
        raise TokenizerError(f"{path}: vocab must start with the 256 single bytes")
    for left, right, merged in merges:
        if not (0 <= left < len(vocab) and 0 <= right < len(vocab) and 256 <= merged < len(vocab)):
            raise TokenizerError(f"{path}: merge ({left},{right},{merged}) out of range")
        if vocab[merged] != vocab[left] + vocab[right]:
            raise TokenizerError(f"{path}: merge ({left},{right},{merged}) does not match vocab")
    return TokenizerModel(vocab, merges)
