"""Complex encoder-decoder realized with real-valued torch modules.

Complex vectors are carried as real tensors of shape (batch, 2, d):
channel 0 real parts, channel 1 imaginary parts.  A complex affine map
W z + b with W = Wr + i Wi is the real 2x2-block map

    [out_r]   [Wr  -Wi] [z_r]   [b_r]
    [out_i] = [Wi   Wr] [z_i] + [b_i]

which the tests verify against direct complex evaluation.  Hidden
activations are a leaky rectifier applied to real and imaginary parts
separately; the final encoder activation shrinks the modulus and keeps
the phase.  Batch normalization, when enabled, standardizes real and
imaginary parts independently before each activation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
import torch
from torch import nn


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of one encoder-decoder realization."""

    input_dim: int
    hidden_dims: Sequence[int] = (4096, 2048)
    latent_dim: int = 1024          # decoder column count
    activation_epsilon: float = 1e-3
    batch_norm: bool = True

    def __post_init__(self):
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ValueError("dimensions must be positive")
        if any(d < 1 for d in self.hidden_dims):
            raise ValueError("hidden dimensions must be positive")
        if self.activation_epsilon < 0:
            raise ValueError("activation epsilon must be nonnegative")


def split_relu(z: torch.Tensor, eps: float) -> torch.Tensor:
    """Leaky rectifier on real and imaginary channels independently."""
    return torch.clamp(z, min=0) + eps * torch.clamp(z, max=0)


def modulus_threshold(z: torch.Tensor, eps: float) -> torch.Tensor:
    """Shrink |z| by eps (to zero inside the eps-ball), preserve phase.

    `z` has the (batch, 2, d) complex layout.
    """
    # tiny floor keeps the gradient finite at z = 0 without disturbing
    # the closed form (relative error < 1e-18 at |z| > eps)
    mod = torch.sqrt(torch.sum(z * z, dim=1, keepdim=True) + 1e-24)
    scale = torch.clamp(mod - eps, min=0) / torch.clamp(mod, min=1e-12)
    return z * scale


class ComplexLinear(nn.Module):
    """Complex affine map as two real weight matrices."""

    def __init__(self, in_dim: int, out_dim: int, bias: bool = True):
        super().__init__()
        scale = 1.0 / np.sqrt(2.0 * in_dim)
        self.weight_real = nn.Parameter(torch.randn(out_dim, in_dim) * scale)
        self.weight_imag = nn.Parameter(torch.randn(out_dim, in_dim) * scale)
        if bias:
            self.bias_real = nn.Parameter(torch.zeros(out_dim))
            self.bias_imag = nn.Parameter(torch.zeros(out_dim))
        else:
            self.register_parameter("bias_real", None)
            self.register_parameter("bias_imag", None)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        zr, zi = z[:, 0], z[:, 1]
        out_r = zr @ self.weight_real.T - zi @ self.weight_imag.T
        out_i = zr @ self.weight_imag.T + zi @ self.weight_real.T
        if self.bias_real is not None:
            out_r = out_r + self.bias_real
            out_i = out_i + self.bias_imag
        return torch.stack([out_r, out_i], dim=1)

    def weight_matrix(self) -> np.ndarray:
        """The complex weight as a numpy matrix (out_dim x in_dim)."""
        with torch.no_grad():
            return (self.weight_real.numpy(force=True)
                    + 1j * self.weight_imag.numpy(force=True))


class SplitBatchNorm(nn.Module):
    """Feature-wise standardization of real and imaginary parts,
    each with its own running statistics and affine parameters."""

    def __init__(self, dim: int):
        super().__init__()
        self.real = nn.BatchNorm1d(dim)
        self.imag = nn.BatchNorm1d(dim)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return torch.stack([self.real(z[:, 0]), self.imag(z[:, 1])], dim=1)


class EncoderDecoder(nn.Module):
    """Sparse autoencoder: fully connected complex encoder, linear
    complex decoder whose columns estimate sensing-matrix columns."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        dims = [spec.input_dim, *spec.hidden_dims, spec.latent_dim]
        self.encoder_layers = nn.ModuleList(
            ComplexLinear(dims[i], dims[i + 1]) for i in range(len(dims) - 1))
        if spec.batch_norm:
            self.norms = nn.ModuleList(SplitBatchNorm(d) for d in dims[1:])
        else:
            self.norms = nn.ModuleList(nn.Identity() for _ in dims[1:])
        self.decoder = ComplexLinear(spec.latent_dim, spec.input_dim,
                                     bias=False)

    def encode(self, y: torch.Tensor) -> torch.Tensor:
        eps = self.spec.activation_epsilon
        z = y
        last = len(self.encoder_layers) - 1
        for i, (layer, norm) in enumerate(zip(self.encoder_layers,
                                              self.norms)):
            z = norm(layer(z))
            z = (modulus_threshold(z, eps) if i == last
                 else split_relu(z, eps))
        return z

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.encode(y))

    def decoder_columns(self) -> np.ndarray:
        """Unit-normalized complex decoder columns (input_dim x latent)."""
        W = self.decoder.weight_matrix()
        norms = np.linalg.norm(W, axis=0)
        return W / np.where(norms == 0, 1.0, norms)

    @torch.no_grad()
    def project_decoder(self) -> None:
        """Rescale every decoder column to unit complex norm.

        Without the constraint the l1 code penalty is gamed by scale
        (latent shrinks, decoder grows) and stops inducing sparsity;
        projecting after each optimizer step keeps the penalty active.
        """
        wr, wi = self.decoder.weight_real, self.decoder.weight_imag
        norms = torch.sqrt((wr * wr + wi * wi).sum(dim=0, keepdim=True))
        norms = torch.clamp(norms, min=1e-12)
        wr.div_(norms)
        wi.div_(norms)


def to_channel_tensor(matrix: np.ndarray) -> torch.Tensor:
    """(d, n) complex numpy matrix -> (n, 2, d) float32 tensor."""
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("expected a 2-D complex matrix")
    stacked = np.stack([m.real.T, m.imag.T], axis=1)
    return torch.tensor(stacked, dtype=torch.float32)


def from_channel_tensor(t: torch.Tensor) -> np.ndarray:
    """(n, 2, d) tensor -> (d, n) complex numpy matrix."""
    a = t.numpy(force=True)
    return (a[:, 0] + 1j * a[:, 1]).T
