"""Checkpoint loading and candidate sampling."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import torch
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

# Below this, sampling degenerates to greedy decoding.
GREEDY_TEMPERATURE = 1e-4
MAX_INPUT_TOKENS = 1024


@dataclass(frozen=True)
class AdapterConfig:
    checkpoint: str
    temperature: float = 0.7
    max_tokens: int = 256
    n_samples: int = 100
    device: str = "cpu"
    batch_size: int = 16
    seed: Optional[int] = None


class CandidateSampler:
    """Wraps a seq2seq checkpoint; one instance per process."""

    def __init__(self, config: AdapterConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(config.checkpoint)
        self.model.to(config.device)
        self.model.eval()

    def _seed_for(self, pair_id: str) -> None:
        if self.config.seed is None:
            return
        digest = hashlib.sha256(f"{self.config.seed}:{pair_id}".encode()).digest()
        torch.manual_seed(int.from_bytes(digest[:8], "little") >> 1)

    @torch.no_grad()
    def sample(self, pair_id: str, wrong_source: str,
               n_samples: Optional[int] = None,
               temperature: Optional[float] = None,
               max_tokens: Optional[int] = None) -> list[str]:
        """n_samples decoded programs for one wrong program.

        Pure temperature sampling; a temperature at or below the greedy
        threshold decodes once greedily and replicates. Sequences that
        hit the token budget are returned as-is for the judge to
        classify.
        """
        n = n_samples if n_samples is not None else self.config.n_samples
        temp = temperature if temperature is not None else self.config.temperature
        budget = max_tokens if max_tokens is not None else self.config.max_tokens
        inputs = self.tokenizer(
            wrong_source, return_tensors="pt", truncation=True, max_length=MAX_INPUT_TOKENS,
        ).to(self.config.device)
        self._seed_for(pair_id)

        if temp <= GREEDY_TEMPERATURE:
            out = self.model.generate(
                **inputs,
                do_sample=False,
                max_new_tokens=budget,
                pad_token_id=self.tokenizer.pad_token_id,
            )
            text = self.tokenizer.batch_decode(out, skip_special_tokens=True)[0]
            return [text] * n

        texts: list[str] = []
        while len(texts) < n:
            chunk = min(self.config.batch_size, n - len(texts))
            out = self.model.generate(
                **inputs,
                do_sample=True,
                temperature=temp,
                top_k=0,
                max_new_tokens=budget,
                num_return_sequences=chunk,
                pad_token_id=self.tokenizer.pad_token_id,
            )
            texts.extend(self.tokenizer.batch_decode(out, skip_special_tokens=True))
        return texts[:n]
