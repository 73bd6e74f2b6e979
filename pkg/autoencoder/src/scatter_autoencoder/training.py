"""Training loop, loss bookkeeping, and realization export.

Each realization trains one encoder-decoder on the same unlabeled
measurement matrix from a different seed, then exports its normalized
decoder columns as a CMX1 file.  Pooling the exports across
realizations and clustering them (done by the consumer) recovers the
sensing-matrix columns.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch

from .cmx import write_cmx
from .network import (EncoderDecoder, NetworkSpec, from_channel_tensor,
                      to_channel_tensor)


class TrainingDivergedError(RuntimeError):
    """The loss became non-finite."""


@dataclass(frozen=True)
class TrainSpec:
    """Optimization schedule for one realization."""

    epochs: int = 10_000
    learning_rate: float = 1e-5
    sparsity_weight: float = 0.1      # mu in loss = ||I(y)-y||^2 + mu ||E(y)||_1
    batch_size: int = 0               # 0 = full batch
    unit_decoder: bool = True         # reproject decoder columns to unit norm
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("need at least one epoch")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.sparsity_weight < 0:
            raise ValueError("sparsity weight must be nonnegative")
        if self.batch_size < 0:
            raise ValueError("batch size must be nonnegative")


@dataclass(frozen=True)
class LossTrace:
    """Per-epoch loss components; train columns are batch-averaged."""

    train_total: np.ndarray
    train_reconstruction: np.ndarray
    train_sparsity: np.ndarray
    validation_total: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "reconstruction",
                        "sparsity", "validation_loss"])
            for e in range(len(self.train_total)):
                w.writerow([e, f"{self.train_total[e]:.8e}",
                            f"{self.train_reconstruction[e]:.8e}",
                            f"{self.train_sparsity[e]:.8e}",
                            f"{self.validation_total[e]:.8e}"])


@dataclass(frozen=True)
class RealizationResult:
    decoder_columns: np.ndarray       # (input_dim, latent) unit columns
    trace: LossTrace
    seed: int
    flagged: bool                     # validation loss ended above start


def loss_terms(model: EncoderDecoder, batch: torch.Tensor,
               mu: float) -> tuple:
    """(total, reconstruction, sparsity) of Eq. loss on one batch."""
    latent = model.encode(batch)
    recon = model.decoder(latent)
    err = recon - batch
    reconstruction = torch.mean(torch.sum(err * err, dim=(1, 2)))
    modulus = torch.sqrt(torch.sum(latent * latent, dim=1) + 1e-24)
    sparsity = torch.mean(torch.sum(modulus, dim=1))
    return reconstruction + mu * sparsity, reconstruction, sparsity


def train_realization(measurements: np.ndarray,
                      validation: np.ndarray,
                      net: NetworkSpec,
                      train: TrainSpec) -> RealizationResult:
    """Train one encoder-decoder realization on unlabeled measurements.

    `measurements` and `validation` are (input_dim, n) complex
    matrices.  Raises TrainingDivergedError on a non-finite loss; a
    validation loss that ends above its initial value only flags the
    realization (clustering downstream discards junk columns).
    """
    for name, m in (("measurements", measurements),
                    ("validation", validation)):
        if m.ndim != 2 or m.shape[0] != net.input_dim:
            raise ValueError(f"{name} must be (input_dim, n)")
    torch.manual_seed(train.seed)
    model = EncoderDecoder(net)
    optimizer = torch.optim.AdamW(model.parameters(),
                                  lr=train.learning_rate)
    Y = to_channel_tensor(measurements)
    V = to_channel_tensor(validation)
    n = Y.shape[0]
    bs = train.batch_size if train.batch_size else n
    mu = train.sparsity_weight
    hist = {k: np.empty(train.epochs) for k in
            ("total", "recon", "sparse", "val")}
    generator = torch.Generator().manual_seed(train.seed + 1)
    for epoch in range(train.epochs):
        model.train()
        order = (torch.randperm(n, generator=generator) if bs < n
                 else torch.arange(n))
        sums = np.zeros(3)
        n_batches = 0
        for start in range(0, n, bs):
            batch = Y[order[start:start + bs]]
            # a trailing mini-batch of size 1 breaks batch statistics
            if bs < n and batch.shape[0] < 2:
                continue
            total, recon, sparse = loss_terms(model, batch, mu)
            if not torch.isfinite(total):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} "
                    f"(reconstruction {recon.item():.3e}, "
                    f"sparsity {sparse.item():.3e})")
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            if train.unit_decoder:
                model.project_decoder()
            sums += [total.item(), recon.item(), sparse.item()]
            n_batches += 1
        hist["total"][epoch], hist["recon"][epoch], hist["sparse"][epoch] = (
            sums / n_batches)
        model.eval()
        with torch.no_grad():
            val_total, _, _ = loss_terms(model, V, mu)
        hist["val"][epoch] = float(val_total)
    trace = LossTrace(hist["total"], hist["recon"], hist["sparse"],
                      hist["val"])
    flagged = bool(hist["val"][-1] > hist["val"][0])
    return RealizationResult(model.decoder_columns(), trace, train.seed,
                             flagged)


def export_pool(results: Sequence[RealizationResult], out_dir) -> Path:
    """Write one CMX1 per realization plus a JSON manifest.

    Returns the manifest path.  The pooled files are consumed unchanged
    by the consumer's clustering stage.
    """
    if not results:
        raise ValueError("no realizations to export")
    dims = {r.decoder_columns.shape for r in results}
    if len(dims) != 1:
        raise ValueError(f"inconsistent decoder shapes across "
                         f"realizations: {sorted(dims)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, r in enumerate(results):
        name = f"decoder_{i:03d}.cmx"
        write_cmx(r.decoder_columns, out / name)
        r.trace.write_csv(out / f"loss_{i:03d}.csv")
        entries.append({"file": name, "loss_trace": f"loss_{i:03d}.csv",
                        "seed": r.seed, "flagged": r.flagged,
                        "columns": r.decoder_columns.shape[1]})
    manifest = {"realizations": entries,
                "input_dim": results[0].decoder_columns.shape[0],
                "total_columns": sum(e["columns"] for e in entries)}
    path = out / "pool_manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
