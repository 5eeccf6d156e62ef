"""Word-level encoder-decoder transformer trained from scratch.

The "base model" identifier selects an architecture from the registry;
there is no pretrained download involved.  Decoding is greedy and capped
at ``max_output_len`` tokens, so it is deterministic for a fixed
checkpoint and input.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ["<pad>", "<bos>", "<eos>", "<unk>"]

# dropout stays 0: these train on a few hundred instances, where the
# regularization noise costs more than the overfitting it prevents
ARCHITECTURES = {
    "tiny-transformer": dict(
        d_model=128, nhead=4, encoder_layers=2, decoder_layers=2, feedforward=256, dropout=0.0
    ),
    "micro-transformer": dict(
        d_model=64, nhead=2, encoder_layers=1, decoder_layers=1, feedforward=128, dropout=0.0
    ),
}


@dataclass(frozen=True)
class ModelConfig:
    base_model: str
    vocab_size: int
    d_model: int
    nhead: int
    encoder_layers: int
    decoder_layers: int
    feedforward: int
    dropout: float
    max_input_len: int = 96
    max_output_len: int = 64

    @classmethod
    def for_base(cls, base_model: str, vocab_size: int, **overrides) -> "ModelConfig":
        if base_model not in ARCHITECTURES:
            raise ValueError(
                f"unknown base model {base_model!r}; known: {sorted(ARCHITECTURES)}"
            )
        return cls(base_model=base_model, vocab_size=vocab_size, **ARCHITECTURES[base_model], **overrides)


class Vocabulary:
    def __init__(self, tokens: list[str]):
        self.tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.ids = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        seen: dict[str, None] = {}
        for text in texts:
            for token in text.split():
                seen.setdefault(token, None)
        return cls(sorted(seen))

    def encode(self, text: str, limit: int) -> list[int]:
        return [self.ids.get(t, UNK) for t in text.split()][:limit]

    def decode(self, ids) -> str:
        out = []
        for i in ids:
            if i == EOS:
                break
            if i not in (PAD, BOS):
                out.append(self.tokens[i])
        return " ".join(out)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.tokens, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens = json.loads(Path(path).read_text(encoding="utf-8"))
        vocab = cls.__new__(cls)
        vocab.tokens = tokens
        vocab.ids = {t: i for i, t in enumerate(tokens)}
        return vocab


class EditProgrammer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.d_model, padding_idx=PAD)
        limit = max(config.max_input_len, config.max_output_len) + 2
        self.positions = nn.Embedding(limit, config.d_model)
        self.transformer = nn.Transformer(
            d_model=config.d_model,
            nhead=config.nhead,
            num_encoder_layers=config.encoder_layers,
            num_decoder_layers=config.decoder_layers,
            dim_feedforward=config.feedforward,
            dropout=config.dropout,
            batch_first=True,
        )
        self.out = nn.Linear(config.d_model, config.vocab_size)
        self.out.weight = self.embedding.weight  # tied

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        pos = torch.arange(ids.size(1), device=ids.device).unsqueeze(0)
        return self.embedding(ids) * math.sqrt(self.config.d_model) + self.positions(pos)

    @staticmethod
    def _causal_mask(length: int, device) -> torch.Tensor:
        return torch.triu(torch.ones(length, length, dtype=torch.bool, device=device), 1)

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        hidden = self.transformer(
            self._embed(src),
            self._embed(tgt_in),
            tgt_mask=self._causal_mask(tgt_in.size(1), src.device),
            src_key_padding_mask=src == PAD,
            tgt_key_padding_mask=tgt_in == PAD,
            memory_key_padding_mask=src == PAD,
        )
        return self.out(hidden)

    @torch.no_grad()
    def greedy_decode(self, src_ids: list[int]) -> list[int]:
        self.eval()
        src = torch.tensor([src_ids], dtype=torch.long)
        memory = self.transformer.encoder(self._embed(src), src_key_padding_mask=src == PAD)
        out_ids = [BOS]
        for _ in range(self.config.max_output_len):
            tgt = torch.tensor([out_ids], dtype=torch.long)
            hidden = self.transformer.decoder(
                self._embed(tgt),
                memory,
                tgt_mask=self._causal_mask(tgt.size(1), src.device),
                memory_key_padding_mask=src == PAD,
            )
            next_id = int(self.out(hidden[:, -1]).argmax(dim=-1))
            if next_id == EOS:
                break
            out_ids.append(next_id)
        return out_ids[1:]


class Predictor:
    """A loaded checkpoint plus its vocabulary."""

    def __init__(self, model: EditProgrammer, vocab: Vocabulary):
        self.model = model
        self.vocab = vocab

    def predict(self, text: str) -> str:
        src = self.vocab.encode(text, self.model.config.max_input_len)
        if not src:
            return "NoAction"
        return self.vocab.decode(self.model.greedy_decode(src))


def save_artifact(directory, model: EditProgrammer, vocab: Vocabulary, metrics: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), directory / "model.pt")
    vocab.save(directory / "vocab.json")
    (directory / "config.json").write_text(
        json.dumps(asdict(model.config), indent=2) + "\n", encoding="utf-8"
    )
    (directory / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_artifact(directory) -> Predictor:
    directory = Path(directory)
    config = ModelConfig(**json.loads((directory / "config.json").read_text(encoding="utf-8")))
    vocab = Vocabulary.load(directory / "vocab.json")
    model = EditProgrammer(config)
    model.load_state_dict(torch.load(directory / "model.pt", map_location="cpu", weights_only=True))
    model.eval()
    return Predictor(model, vocab)
