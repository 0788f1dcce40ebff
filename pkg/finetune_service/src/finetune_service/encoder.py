"""Character-level bi-encoder over hashed character buckets.

The encoder is deliberately small so it trains from scratch on a CPU in
seconds: each character hashes into a fixed bucket table, a mean-pooling
embedding bag turns a sentence into one vector, and a two-layer head
projects it into the retrieval space.  Any text in any script embeds
without a vocabulary file, which keeps model artifacts self-contained.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ModelConfigError

# Knuth multiplicative hash keeps the char -> bucket map independent of
# interpreter hash randomization.
_HASH_MULTIPLIER = 2654435761

_IDENTIFIER_RE = re.compile(r"^char(?P<dim>\d+)x(?P<buckets>\d+)$")

DEFAULT_IDENTIFIER = "char64x4096"

CONFIG_NAME = "config.json"
WEIGHTS_NAME = "weights.pt"


def parse_identifier(identifier: str) -> tuple[int, int]:
    """Split an encoder identifier like ``char64x4096`` into (dim, buckets)."""
    match = _IDENTIFIER_RE.match(identifier)
    if not match:
        raise ModelConfigError(
            f"unknown encoder identifier {identifier!r}; expected char<dim>x<buckets>"
        )
    dim = int(match.group("dim"))
    buckets = int(match.group("buckets"))
    if dim < 1 or buckets < 1:
        raise ModelConfigError(f"encoder identifier {identifier!r} has zero sizes")
    return dim, buckets


def _bucket(ch: str, buckets: int) -> int:
    return (ord(ch) * _HASH_MULTIPLIER) % buckets


class CharEncoder(nn.Module):
    """Mean-of-character-embeddings encoder with a small projection head."""

    def __init__(self, identifier: str = DEFAULT_IDENTIFIER, seed: int = 0):
        super().__init__()
        dim, buckets = parse_identifier(identifier)
        self.identifier = identifier
        self.dim = dim
        self.buckets = buckets
        self.seed = seed
        torch.manual_seed(seed)
        self.embedding = nn.EmbeddingBag(buckets, dim, mode="mean")
        self.head = nn.Sequential(nn.Linear(dim, dim), nn.Tanh(), nn.Linear(dim, dim))

    def _flatten(self, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        ids: list[int] = []
        offsets: list[int] = []
        for text in texts:
            if not text:
                raise ValueError("cannot embed empty text")
            offsets.append(len(ids))
            ids.extend(_bucket(ch, self.buckets) for ch in text)
        return torch.tensor(ids, dtype=torch.long), torch.tensor(
            offsets, dtype=torch.long
        )

    def forward(self, texts: list[str], normalize: bool = True) -> torch.Tensor:
        ids, offsets = self._flatten(list(texts))
        pooled = self.embedding(ids, offsets)
        out = self.head(pooled)
        if normalize:
            out = nn.functional.normalize(out, dim=-1)
        return out

    @torch.inference_mode()
    def encode(self, texts: list[str], normalize: bool = True) -> np.ndarray:
        """Embed texts for serving/evaluation; no grad, eval mode."""
        was_training = self.training
        self.eval()
        try:
            out = self.forward(list(texts), normalize=normalize)
        finally:
            self.train(was_training)
        return out.detach().cpu().numpy().astype(np.float64)


def save_encoder(encoder: CharEncoder, out_dir: str | Path, **extra) -> Path:
    """Write a self-contained model artifact directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "identifier": encoder.identifier,
        "dim": encoder.dim,
        "buckets": encoder.buckets,
        "seed": encoder.seed,
        **extra,
    }
    (out / CONFIG_NAME).write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    torch.save(encoder.state_dict(), out / WEIGHTS_NAME)
    return out


def load_encoder(model_dir: str | Path) -> CharEncoder:
    """Rebuild an encoder from a saved artifact directory."""
    model_dir = Path(model_dir)
    config_path = model_dir / CONFIG_NAME
    weights_path = model_dir / WEIGHTS_NAME
    if not config_path.is_file() or not weights_path.is_file():
        raise ModelConfigError(f"{model_dir} is not a model artifact directory")
    try:
        config = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelConfigError(f"{config_path}: {exc}") from exc
    encoder = CharEncoder(config["identifier"], seed=int(config.get("seed", 0)))
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    encoder.load_state_dict(state)
    encoder.eval()
    return encoder
