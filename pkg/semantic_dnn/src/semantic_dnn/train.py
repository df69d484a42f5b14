"""Two-stage training: semantic classification, then covert channel coding.

Stage 1 learns an image -> k-bit semantic code and a classifier on the
quantized bits (straight-through gradients across the quantizer).
Stage 2 freezes stage 1 and learns a channel encoder/decoder carrying
the k bits over n AWGN uses under a distortion + covertness loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .config import COVERT_TOTAL_SUM, TrainConfig
from .data import Dataset
from .models import (
    ChannelDecoder,
    ChannelEncoder,
    Classifier,
    SemanticEncoder,
    awgn,
    binary_quantize,
)


def covert_statistic(x: torch.Tensor, n: int, epsilon: float,
                     variant: str) -> torch.Tensor:
    """Normalized transmit statistic whose square is pushed toward 1."""
    total = x.sum(dim=1)
    if variant != COVERT_TOTAL_SUM:
        total = total / n
    return total / (n * epsilon) ** 0.5


def covert_loss(x: torch.Tensor, n: int, epsilon: float,
                variant: str) -> torch.Tensor:
    s = covert_statistic(x, n, epsilon, variant)
    return (s.square() - 1.0).abs().mean()


@dataclass
class Stage1Result:
    encoder: SemanticEncoder
    classifier: Classifier
    train_accuracy: list = field(default_factory=list)  # per epoch
    test_accuracy: float = 0.0


@dataclass
class Stage2Result:
    channel_encoder: ChannelEncoder
    channel_decoder: ChannelDecoder
    history: list = field(default_factory=list)  # per-epoch loss terms
    final_covert_gap: float = 0.0  # mean |stat^2 - 1| on the last epoch


def _batches(count: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(count, generator=generator)
    for start in range(0, count, batch_size):
        yield order[start:start + batch_size]


def semantic_bits(encoder: SemanticEncoder, images: torch.Tensor,
                  chunk: int = 2048) -> torch.Tensor:
    """Quantized k-bit codes for a batch of images, without gradients."""
    was_training = encoder.training
    encoder.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, images.shape[0], chunk):
            outs.append(binary_quantize(encoder(images[start:start + chunk])))
    encoder.train(was_training)
    return torch.cat(outs)


def train_stage1(config: TrainConfig, data: Dataset) -> Stage1Result:
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed + 1)
    encoder = SemanticEncoder(config.k, config.encoder_width)
    classifier = Classifier(config.k, 10, config.classifier_width)
    params = list(encoder.parameters()) + list(classifier.parameters())
    opt = torch.optim.Adam(params, lr=config.stage1_lr,
                           betas=config.adam_betas, eps=config.adam_eps)
    images = torch.from_numpy(data.train_images)
    labels = torch.from_numpy(data.train_labels)
    ce = nn.CrossEntropyLoss()
    result = Stage1Result(encoder, classifier)
    encoder.train()
    classifier.train()
    for _ in range(config.stage1_epochs):
        correct = 0
        for idx in _batches(images.shape[0], config.batch_size, gen):
            x, y = images[idx], labels[idx]
            logits = classifier(binary_quantize(encoder(x)))
            loss = config.lambda_ce * ce(logits, y)
            opt.zero_grad()
            loss.backward()
            opt.step()
            correct += int((logits.argmax(dim=1) == y).sum())
        result.train_accuracy.append(correct / images.shape[0])
    encoder.eval()
    classifier.eval()
    result.test_accuracy = stage1_accuracy(encoder, classifier,
                                           data.test_images, data.test_labels)
    return result


def stage1_accuracy(encoder, classifier, images_np, labels_np) -> float:
    images = torch.from_numpy(images_np)
    labels = torch.from_numpy(labels_np)
    with torch.no_grad():
        logits = classifier(semantic_bits(encoder, images))
    return float((logits.argmax(dim=1) == labels).float().mean())


def train_stage2(config: TrainConfig, stage1: Stage1Result,
                 data: Dataset) -> Stage2Result:
    torch.manual_seed(config.seed + 2)
    gen = torch.Generator().manual_seed(config.seed + 3)
    enc = ChannelEncoder(config.k, config.n, config.codec_width)
    dec = ChannelDecoder(config.n, config.k, config.codec_width)
    opt = torch.optim.Adam(list(enc.parameters()) + list(dec.parameters()),
                           lr=config.stage2_lr, betas=config.adam_betas,
                           eps=config.adam_eps)
    # stage 1 is frozen: precompute the bit codes once
    bits = semantic_bits(stage1.encoder, torch.from_numpy(data.train_images))
    result = Stage2Result(enc, dec)
    for _ in range(config.stage2_epochs):
        sums = {"distortion": 0.0, "covert": 0.0, "total": 0.0}
        batches = 0
        for idx in _batches(bits.shape[0], config.batch_size, gen):
            u = bits[idx]
            x = enc(u)
            y = awgn(x, config.awgn_noise_power, gen)
            u_hat = torch.sigmoid(dec(y))
            distortion = (u_hat - u).abs().mean()
            covert = covert_loss(x, config.n, config.epsilon,
                                 config.covert_loss_variant)
            loss = config.lambda_d * distortion + config.lambda_covert * covert
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums["distortion"] += distortion.item()
            sums["covert"] += covert.item()
            sums["total"] += loss.item()
            batches += 1
        result.history.append({k: v / batches for k, v in sums.items()})
    result.final_covert_gap = result.history[-1]["covert"]
    return result


def evaluate(config: TrainConfig, stage1: Stage1Result, stage2: Stage2Result,
             images_np: np.ndarray, labels_np: np.ndarray,
             channel: str = "awgn", seed: int | None = None) -> float:
    """End-to-end test accuracy through quantizer, codec and channel.

    ``channel`` is ``awgn`` or ``identity`` (noiseless stub).
    """
    images = torch.from_numpy(images_np)
    labels = torch.from_numpy(labels_np)
    gen = torch.Generator().manual_seed(config.seed + 4 if seed is None else seed)
    with torch.no_grad():
        u = semantic_bits(stage1.encoder, images)
        x = stage2.channel_encoder(u)
        if channel == "identity":
            y = x
        elif channel == "awgn":
            y = awgn(x, config.awgn_noise_power, gen)
        else:
            raise ValueError(f"unknown channel {channel!r}")
        u_hat = (stage2.channel_decoder(y) > 0).to(u.dtype)
        logits = stage1.classifier(u_hat)
    return float((logits.argmax(dim=1) == labels).float().mean())


def train_and_evaluate(config: TrainConfig, data: Dataset) -> dict:
    """Both stages plus end-to-end accuracy; returns a metrics record."""
    stage1 = train_stage1(config, data)
    stage2 = train_stage2(config, stage1, data)
    accuracy = evaluate(config, stage1, stage2,
                        data.test_images, data.test_labels)
    return {
        "n": config.n, "k": config.k,
        "stage1_test_accuracy": stage1.test_accuracy,
        "accuracy": accuracy,
        "final_distortion": stage2.history[-1]["distortion"],
        "final_covert_gap": stage2.final_covert_gap,
        "stage1": stage1, "stage2": stage2,
    }


def run_models(base: TrainConfig, model_specs: list[dict],
               data: Dataset) -> list[dict]:
    """Grid over (model, n, k) producing one row per trained pipeline.

    Each spec is {"model": name, "n": int, "k_list": [...], "overrides": {}};
    a model named ``non-covert`` trains with lambda_covert = 0. Within
    each (model, n) group the best-accuracy row gets ``k_star_flag`` = 1.
    """
    rows = []
    for spec in model_specs:
        overrides = dict(spec.get("overrides", {}))
        if spec["model"] == "non-covert":
            overrides.setdefault("lambda_covert", 0.0)
        group = []
        for k in spec["k_list"]:
            cfg = base.with_overrides(n=int(spec["n"]), k=int(k), **overrides)
            rec = train_and_evaluate(cfg, data)
            group.append({"model": spec["model"], "n": cfg.n, "k": cfg.k,
                          "accuracy": rec["accuracy"],
                          "stage1_accuracy": rec["stage1_test_accuracy"],
                          "final_distortion": rec["final_distortion"],
                          "k_star_flag": 0})
        best = max(range(len(group)), key=lambda i: group[i]["accuracy"])
        group[best]["k_star_flag"] = 1
        rows.extend(group)
    return rows
