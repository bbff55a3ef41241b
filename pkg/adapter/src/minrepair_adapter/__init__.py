"""Inference-only candidate generator for the minrepair harness.

Serves the line-delimited JSON generator protocol (and a batch export
mode) from a pretrained encoder-decoder checkpoint. Couples to the
harness only through the protocol and the replay JSONL schema.
"""

__version__ = "0.1.0"
