"""Tiny random-weights checkpoint factory for tests and smoke runs.

A byte-level tokenizer plus a two-layer seq2seq model (~140k params):
loads in milliseconds, produces garbage programs, and exercises the
full protocol path.
"""

from __future__ import annotations

from pathlib import Path

import torch
from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration


def make_tiny_checkpoint(out_dir: str | Path, seed: int = 0) -> Path:
    out_dir = Path(out_dir)
    torch.manual_seed(seed)
    config = T5Config(
        vocab_size=384,
        d_model=64,
        d_kv=16,
        d_ff=128,
        num_layers=2,
        num_heads=2,
        decoder_start_token_id=0,
        pad_token_id=0,
        eos_token_id=1,
    )
    model = T5ForConditionalGeneration(config)
    model.save_pretrained(out_dir)
    ByT5Tokenizer().save_pretrained(out_dir)
    return out_dir
