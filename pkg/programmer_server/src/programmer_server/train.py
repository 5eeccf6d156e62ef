"""Training: fit the programmer on (input, target) lines, select by dev F1.

Hyperparameters are restricted to the published grid (learning rate in
{5e-5, 1e-4, 2e-4}, epochs in {5, 10, 20}, batch size 4).  The dev set
must be disjoint from the training set.  After every epoch the model is
scored on dev (exact match and mean action F1); the checkpoint with the
best dev action F1 wins, exact match breaking ties.
"""

from __future__ import annotations

import argparse
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import DataError
from .grammar import action_f1, parse_actions
from .model import (
    BOS,
    EOS,
    PAD,
    EditProgrammer,
    ModelConfig,
    Predictor,
    Vocabulary,
    save_artifact,
)

LEARNING_RATES = (5e-5, 1e-4, 2e-4)
EPOCH_CHOICES = (5, 10, 20)
BATCH_SIZE = 4


@dataclass(frozen=True)
class TrainJob:
    train_file: str
    dev_file: str
    output_dir: str
    base_model: str = "tiny-transformer"
    learning_rate: float = 2e-4
    epochs: int = 20
    batch_size: int = BATCH_SIZE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate not in LEARNING_RATES:
            raise ValueError(f"learning rate must be one of {LEARNING_RATES}")
        if self.epochs not in EPOCH_CHOICES:
            raise ValueError(f"epochs must be one of {EPOCH_CHOICES}")
        if self.batch_size != BATCH_SIZE:
            raise ValueError(f"batch size is fixed at {BATCH_SIZE}")


def read_instances(path) -> list[tuple[str, str]]:
    """Load and validate a JSON-lines training file."""
    instances: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
                source = record["input"]
                target = record["target"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"line {line_no}: bad record ({exc})") from exc
            if not isinstance(source, str) or not isinstance(target, str):
                raise DataError(f"line {line_no}: input and target must be strings")
            try:
                parse_actions(target)
            except DataError as exc:
                raise DataError(f"line {line_no}: {exc}") from exc
            instances.append((source, target))
    if not instances:
        raise DataError(f"{path} contains no instances")
    return instances


def _batches(encoded, batch_size, rng):
    order = list(range(len(encoded)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [encoded[i] for i in order[start : start + batch_size]]
        src_len = max(len(s) for s, _ in chunk)
        tgt_len = max(len(t) for _, t in chunk)
        src = torch.full((len(chunk), src_len), PAD, dtype=torch.long)
        tgt = torch.full((len(chunk), tgt_len), PAD, dtype=torch.long)
        for row, (s, t) in enumerate(chunk):
            src[row, : len(s)] = torch.tensor(s, dtype=torch.long)
            tgt[row, : len(t)] = torch.tensor(t, dtype=torch.long)
        yield src, tgt


def evaluate(predictor: Predictor, instances) -> dict:
    exact = 0
    f1_sum = 0.0
    for source, target in instances:
        decoded = predictor.predict(source)
        exact += decoded == target
        f1_sum += action_f1(decoded, target)
    return {
        "exact_match": exact / len(instances),
        "action_f1": f1_sum / len(instances),
    }


def train(job: TrainJob) -> tuple[Path, dict]:
    """Fit, select the best checkpoint, write the artifact directory."""
    train_instances = read_instances(job.train_file)
    dev_instances = read_instances(job.dev_file)
    overlap = set(train_instances) & set(dev_instances)
    if overlap:
        raise DataError(f"dev set overlaps training set ({len(overlap)} shared instances)")

    torch.manual_seed(job.seed)
    rng = random.Random(job.seed)
    vocab = Vocabulary.build([s for s, _ in train_instances] + [t for _, t in train_instances])
    config = ModelConfig.for_base(job.base_model, len(vocab))
    model = EditProgrammer(config)
    optimizer = torch.optim.AdamW(model.parameters(), lr=job.learning_rate)
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD)
    steps_per_epoch = (len(train_instances) + job.batch_size - 1) // job.batch_size
    total_steps = steps_per_epoch * job.epochs
    warmup = max(1, total_steps // 20)

    def lr_factor(step: int) -> float:
        # linear warmup then cosine decay to 10% of the peak rate
        if step < warmup:
            return (step + 1) / warmup
        progress = (step - warmup) / max(1, total_steps - warmup)
        return 0.1 + 0.45 * (1 + math.cos(math.pi * progress))

    scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lr_factor)

    encoded = [
        (
            vocab.encode(source, config.max_input_len),
            [BOS] + vocab.encode(target, config.max_output_len) + [EOS],
        )
        for source, target in train_instances
    ]

    history = []
    best = {"action_f1": -1.0, "exact_match": -1.0, "epoch": 0}
    best_state = None
    for epoch in range(1, job.epochs + 1):
        model.train()
        total_loss = 0.0
        for src, tgt in _batches(encoded, job.batch_size, rng):
            logits = model(src, tgt[:, :-1])
            loss = loss_fn(logits.reshape(-1, logits.size(-1)), tgt[:, 1:].reshape(-1))
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), 1.0)
            optimizer.step()
            scheduler.step()
            total_loss += loss.item()
        scores = evaluate(Predictor(model, vocab), dev_instances)
        record = {"epoch": epoch, "train_loss": total_loss, **scores}
        history.append(record)
        better = scores["action_f1"] > best["action_f1"] or (
            scores["action_f1"] == best["action_f1"]
            and scores["exact_match"] > best["exact_match"]
        )
        if better:
            best = {**scores, "epoch": epoch}
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    model.load_state_dict(best_state)
    model.eval()
    metrics = {"best": best, "history": history, "job": {
        "base_model": job.base_model,
        "learning_rate": job.learning_rate,
        "epochs": job.epochs,
        "batch_size": job.batch_size,
        "seed": job.seed,
    }}
    save_artifact(job.output_dir, model, vocab, metrics)
    return Path(job.output_dir), metrics


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Train the edit-action programmer.")
    parser.add_argument("--train", required=True, help="training JSONL")
    parser.add_argument("--dev", required=True, help="dev JSONL (disjoint from training)")
    parser.add_argument("--out", required=True, help="artifact output directory")
    parser.add_argument("--base", default="tiny-transformer")
    parser.add_argument("--lr", type=float, default=2e-4, choices=LEARNING_RATES)
    parser.add_argument("--epochs", type=int, default=20, choices=EPOCH_CHOICES)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    _, metrics = train(
        TrainJob(
            train_file=args.train,
            dev_file=args.dev,
            output_dir=args.out,
            base_model=args.base,
            learning_rate=args.lr,
            epochs=args.epochs,
            seed=args.seed,
        )
    )
    print(json.dumps(metrics["best"], indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
