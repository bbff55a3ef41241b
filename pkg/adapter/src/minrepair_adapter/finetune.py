"""Optional fine-tuning driver: wrong -> correct sequence pairs.

A thin wrapper over the transformers Trainer, provided for completeness;
nothing in the harness or the test suite depends on it. Expects a pairs
JSONL file (the harness's corpus format) and writes a checkpoint the
serve/export commands can load.

    minrepair-adapter finetune --checkpoint Salesforce/codet5-base \
        --pairs train_pairs.jsonl --out ./finetuned --epochs 3
"""

from __future__ import annotations

import json
import sys
from pathlib import Path


def finetune(checkpoint: str, pairs_path: str | Path, out_dir: str | Path,
             epochs: float = 3.0, batch_size: int = 8, learning_rate: float = 5e-5,
             max_length: int = 256) -> int:
    import torch
    from transformers import (
        AutoModelForSeq2SeqLM,
        AutoTokenizer,
        DataCollatorForSeq2Seq,
        Trainer,
        TrainingArguments,
    )

    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint)

    examples = []
    with open(pairs_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            pair = json.loads(line)
            features = tokenizer(pair["wrong"], truncation=True, max_length=max_length)
            labels = tokenizer(pair["correct"], truncation=True, max_length=max_length)
            features["labels"] = labels["input_ids"]
            examples.append(features)
    if not examples:
        print("error: no training pairs", file=sys.stderr)
        return 1

    args = TrainingArguments(
        output_dir=str(out_dir),
        num_train_epochs=epochs,
        per_device_train_batch_size=batch_size,
        learning_rate=learning_rate,
        logging_steps=50,
        save_strategy="no",
        report_to=[],
        use_cpu=not torch.cuda.is_available(),
    )
    trainer = Trainer(
        model=model,
        args=args,
        train_dataset=examples,
        data_collator=DataCollatorForSeq2Seq(tokenizer, model=model),
    )
    trainer.train()
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return 0
