"""Run configuration.  Defaults follow the published hyperparameters."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import FormatError, UsageError


@dataclass
class Config:
    d: int = 200
    num_classes: int = 5
    gamma: float = 0.8
    lambda1: float = 0.25
    lambda2: float = 0.25
    lambda3: float = 0.5
    lambda1_low: float = 0.6
    lambda2_low: float = 0.4
    adam_lr: float = 0.012
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sgd_lr: float = 0.008
    batch_size: int = 64
    l2: float = 1e-5
    dropout: float = 0.2
    baseline_samples: int = 5
    baseline_mode: str = "per_step"
    grad_clip: float = 5.0
    pretrain_epochs: int = 5
    policy_epochs: int = 5
    finetune: bool = False
    cosine_eps: float = 1e-4
    prob_floor: float = 1e-12
    high_features: str = "interaction"
    # initial policy logits; positive values start near the select-all regime of pretraining
    policy_bias_high: float = 2.0
    policy_bias_low: float = 1.0
    reset_low_state: bool = False
    aspect_trainable: bool = False
    embedding_init: float = 0.1
    forget_bias: float = 1.0
    dtype: str = "float64"
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> "Config":
        if self.d < 1:
            raise UsageError("d must be positive")
        if self.num_classes < 2:
            raise UsageError("num_classes must be >= 2")
        if not 0.0 < self.gamma <= 1.0:
            raise UsageError("gamma must lie in (0, 1]")
        for name in ("lambda1", "lambda2", "lambda3", "lambda1_low", "lambda2_low"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be non-negative")
        if self.baseline_samples < 0:
            raise UsageError("baseline_samples must be >= 0")
        if self.baseline_mode not in ("per_step", "trajectory"):
            raise UsageError("baseline_mode must be 'per_step' or 'trajectory'")
        if self.high_features not in ("concat", "interaction"):
            raise UsageError("high_features must be 'concat' or 'interaction'")
        if self.dtype not in ("float64", "float32"):
            raise UsageError("dtype must be float64 or float32")
        if not 0.0 <= self.dropout < 1.0:
            raise UsageError("dropout must lie in [0, 1)")
        if self.batch_size < 1:
            raise UsageError("batch_size must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**data).validate()

    def with_overrides(self, pairs) -> "Config":
        """Apply ``key=value`` strings; values are parsed as JSON when possible."""
        data = self.to_dict()
        fields = {f.name: f for f in dataclasses.fields(self)}
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            if not sep:
                raise UsageError(f"--set expects key=value, got {pair!r}")
            key = key.strip()
            if key not in fields:
                raise UsageError(f"unknown config key: {key}")
            try:
                val = json.loads(raw)
            except json.JSONDecodeError:
                val = raw
            current = data[key]
            if isinstance(current, bool) and not isinstance(val, bool):
                raise UsageError(f"{key} expects true/false")
            if isinstance(current, float) and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if type(current) is not type(val) and not isinstance(current, dict):
                raise UsageError(f"{key} expects {type(current).__name__}, got {raw!r}")
            data[key] = val
        return Config.from_dict(data)


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(str(exc), line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise FormatError("config must be a JSON object")
    return Config.from_dict(data)
