"""Training configuration for the two-stage covert semantic pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

COVERT_AS_PRINTED = "as-printed"
COVERT_TOTAL_SUM = "total-sum"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for both training stages.

    Stage 1 trains the semantic encoder (image -> k binary units) jointly
    with the classifier under cross-entropy. Stage 2 freezes stage 1 and
    trains the channel encoder/decoder (k bits -> n real channel uses ->
    k bits) over AWGN under a distortion + covertness loss.

    ``covert_loss_variant`` selects the normalization of the covertness
    statistic: ``as-printed`` uses the per-use average of the transmitted
    sequence, ``total-sum`` uses its total sum; both are divided by
    sqrt(n * epsilon) and pushed toward unit square.
    """

    n: int = 512
    k: int = 6
    stage1_epochs: int = 60
    stage1_lr: float = 0.01
    lambda_ce: float = 1.0
    stage2_epochs: int = 60
    stage2_lr: float = 0.005
    lambda_d: float = 10.0
    lambda_covert: float = 10.0
    epsilon: float = 0.01
    delta_n: float = 0.02
    awgn_noise_power: float = 0.63
    batch_size: int = 128
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    covert_loss_variant: str = COVERT_AS_PRINTED
    encoder_width: int = 8
    classifier_width: int = 64
    codec_width: int = 256

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be positive")
        if self.covert_loss_variant not in (COVERT_AS_PRINTED, COVERT_TOTAL_SUM):
            raise ValueError(
                f"unknown covert_loss_variant {self.covert_loss_variant!r}")
        if self.awgn_noise_power < 0 or self.epsilon <= 0:
            raise ValueError("noise power must be >= 0 and epsilon > 0")
        object.__setattr__(self, "adam_betas", tuple(self.adam_betas))

    def with_overrides(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc) -> "TrainConfig":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        elif hasattr(doc, "read"):
            doc = json.load(doc)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)
