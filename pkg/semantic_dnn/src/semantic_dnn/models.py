"""Network blocks: binary quantizer with straight-through gradients,
semantic encoder, classifier and the channel codec."""

from __future__ import annotations

import torch
from torch import nn


class _BinaryQuantize(torch.autograd.Function):
    """Elementwise 1{x > 0} forward, identity (straight-through) backward."""

    @staticmethod
    def forward(ctx, x):
        return (x > 0).to(x.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output


def binary_quantize(x: torch.Tensor) -> torch.Tensor:
    return _BinaryQuantize.apply(x)


class SemanticEncoder(nn.Module):
    """Image (784,) -> k pre-quantization activations."""

    def __init__(self, k: int, width: int = 8):
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(1, width, 5, stride=2, padding=2), nn.ReLU(),
            nn.Conv2d(width, 2 * width, 5, stride=2, padding=2), nn.ReLU(),
        )
        # batch norm centers the pre-quantization activations around the
        # quantizer threshold; without it straight-through training stalls
        self.head = nn.Sequential(
            nn.Linear(2 * width * 7 * 7, k), nn.BatchNorm1d(k))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv(x.view(-1, 1, 28, 28))
        return self.head(h.flatten(1))


class Classifier(nn.Module):
    """k binary semantic units -> class logits."""

    def __init__(self, k: int, classes: int = 10, width: int = 64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(k, width), nn.ReLU(), nn.Linear(width, classes))

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        return self.net(u)


class ChannelEncoder(nn.Module):
    """k bits -> n bounded channel inputs (tanh keeps |x| <= 1)."""

    def __init__(self, k: int, n: int, width: int = 256):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(k, width), nn.ReLU(), nn.Linear(width, n), nn.Tanh())

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        return self.net(u)


class ChannelDecoder(nn.Module):
    """n channel outputs -> k bit logits (mirror of the encoder)."""

    def __init__(self, n: int, k: int, width: int = 256):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(n, width), nn.ReLU(), nn.Linear(width, k))

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        return self.net(y)


def awgn(x: torch.Tensor, noise_power: float,
         generator: torch.Generator | None = None) -> torch.Tensor:
    if noise_power == 0.0:
        return x
    noise = torch.randn(x.shape, generator=generator, dtype=x.dtype)
    return x + noise * (noise_power ** 0.5)
