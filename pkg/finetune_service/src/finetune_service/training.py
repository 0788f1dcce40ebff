"""Contrastive fine-tuning of the character encoder.

Each sample contributes, per positive, the term

    log(1 + sum_j exp((n_j - p_i) / tau))

over cosine similarities, averaged across its positives; the batch loss
averages across samples.  Only the sample's own negatives enter the
denominator — no in-batch negatives.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .encoder import CharEncoder, save_encoder
from .errors import ModelConfigError
from .samples import TrainingSample, read_samples

log = logging.getLogger("finetune_service")


@dataclass(frozen=True)
class TrainHyperparams:
    negatives: int = 5
    learning_rate: float = 1e-5
    warmup_ratio: float = 0.1
    tau: float = 0.2
    epochs: int = 2
    base_model: str = "char64x4096"

    def __post_init__(self) -> None:
        for name in ("negatives", "learning_rate", "warmup_ratio", "tau", "epochs"):
            if getattr(self, name) <= 0:
                raise ModelConfigError(f"{name} must be positive")
        if self.warmup_ratio > 1:
            raise ModelConfigError("warmup_ratio cannot exceed 1")


@dataclass(frozen=True)
class TrainReport:
    out_dir: Path
    epoch_losses: tuple[float, ...]
    eval_loss_before: float
    eval_loss_after: float
    trained_samples: int


def sample_loss(
    query_vec: torch.Tensor,
    pos_vecs: torch.Tensor,
    neg_vecs: torch.Tensor | None,
    tau: float,
) -> torch.Tensor:
    """Loss for one (query, positives, negatives) triple.

    Inputs are raw vectors; cosine similarity is taken here so callers
    never have to pre-normalize.  With no negatives every term is
    log(1) = 0.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if pos_vecs.ndim != 2 or pos_vecs.shape[0] == 0:
        raise ValueError("at least one positive vector required")
    q = nn.functional.normalize(query_vec, dim=-1)
    pos_sims = nn.functional.normalize(pos_vecs, dim=-1) @ q
    if neg_vecs is None or neg_vecs.shape[0] == 0:
        # exact zero that stays on the autograd graph so all-zero batches
        # can still run backward
        return pos_sims.sum() * 0.0
    neg_sims = nn.functional.normalize(neg_vecs, dim=-1) @ q
    lse = torch.logsumexp(neg_sims / tau, dim=0)
    per_positive = nn.functional.softplus(lse - pos_sims / tau)
    return per_positive.mean()


def batch_loss(
    query_vecs: list[torch.Tensor],
    pos_vecs: list[torch.Tensor],
    neg_vecs: list[torch.Tensor | None],
    tau: float,
) -> torch.Tensor:
    """Mean of sample losses over a batch of triples."""
    if not query_vecs:
        raise ValueError("empty batch")
    losses = [
        sample_loss(q, p, n, tau) for q, p, n in zip(query_vecs, pos_vecs, neg_vecs)
    ]
    return torch.stack(losses).mean()


def _sample_batch_loss(
    encoder: CharEncoder, batch: list[TrainingSample], hyper: TrainHyperparams
) -> torch.Tensor:
    queries, positives, negatives = [], [], []
    for sample in batch:
        queries.append(encoder([sample.query])[0])
        positives.append(encoder(list(sample.positives)))
        negs = list(sample.negatives[: hyper.negatives])
        negatives.append(encoder(negs) if negs else None)
    return batch_loss(queries, positives, negatives, hyper.tau)


def train(
    samples_path: str | Path,
    hyper: TrainHyperparams,
    out_dir: str | Path,
    *,
    seed: int = 0,
    batch_size: int = 8,
    encoder: CharEncoder | None = None,
) -> TrainReport:
    """Fine-tune the encoder on a sample file and save the artifact.

    ``encoder`` lets callers continue from an existing model; by default
    a fresh one is built from ``hyper.base_model``.  The report carries
    the loss on a fixed batch evaluated before and after training, so
    callers can check that optimization actually moved the model.
    """
    samples = read_samples(samples_path)
    if not samples:
        raise ModelConfigError(f"{samples_path}: no usable samples")
    if encoder is None:
        encoder = CharEncoder(hyper.base_model, seed=seed)
    torch.manual_seed(seed)

    fixed_batch = samples[: min(len(samples), batch_size)]
    with torch.no_grad():
        eval_before = float(_sample_batch_loss(encoder, fixed_batch, hyper))

    batches = [
        samples[i : i + batch_size] for i in range(0, len(samples), batch_size)
    ]
    total_steps = len(batches) * hyper.epochs
    warmup_steps = max(1, math.ceil(total_steps * hyper.warmup_ratio))
    optimizer = torch.optim.AdamW(encoder.parameters(), lr=hyper.learning_rate)
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: min(1.0, (step + 1) / warmup_steps),
    )

    encoder.train()
    epoch_losses = []
    for epoch in range(hyper.epochs):
        running = 0.0
        for batch in batches:
            optimizer.zero_grad()
            loss = _sample_batch_loss(encoder, batch, hyper)
            loss.backward()
            optimizer.step()
            schedule.step()
            running += float(loss.detach())
        mean_loss = running / len(batches)
        epoch_losses.append(mean_loss)
        log.info("epoch %d mean loss %.6f", epoch + 1, mean_loss)

    encoder.eval()
    with torch.no_grad():
        eval_after = float(_sample_batch_loss(encoder, fixed_batch, hyper))
    log.info("fixed-batch loss %.6f -> %.6f", eval_before, eval_after)

    out = save_encoder(
        encoder,
        out_dir,
        tau=hyper.tau,
        trained_samples=len(samples),
        epochs=hyper.epochs,
    )
    return TrainReport(
        out_dir=out,
        epoch_losses=tuple(epoch_losses),
        eval_loss_before=eval_before,
        eval_loss_after=eval_after,
        trained_samples=len(samples),
    )
