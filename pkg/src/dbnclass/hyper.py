"""Hyperparameters and per-epoch training records."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields


@dataclass(frozen=True)
class Hyper:
    """Training knobs shared by pretraining and every strategy.

    ``delta`` is the absolute box radius for the boxed strategies; use
    ``math.inf`` for an unconstrained box. ``rho0``/``mu0`` are the initial
    weights of the DBN+loss and bilevel penalty terms, both decayed as
    ``v0 / (1 + decay * epoch)``.
    """

    pretrain_lr: float = 0.01
    pretrain_epochs: int = 100
    finetune_lr: float = 0.1
    finetune_epochs: int = 300
    batch_size: int = 10
    cd_k: int = 1
    delta: float = 0.1
    rho0: float = 1.0
    mu0: float = 1.0
    decay: float = 0.1
    mc_samples: int = 10
    el_mode: str = "auto"  # "enum", "mc" or "auto" (enum when the top layer is small)
    el_enum_max_units: int = 12
    hvp_mode: str = "fd_cd"  # "fd_cd" or "exact"

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be nonnegative")
        if self.batch_size < 1 or self.cd_k < 1 or self.mc_samples < 1:
            raise ValueError("batch_size, cd_k and mc_samples must be >= 1")
        if min(self.pretrain_lr, self.finetune_lr) < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.delta < 0 or self.rho0 < 0 or self.mu0 < 0 or self.decay < 0:
            raise ValueError("delta, rho0, mu0 and decay must be nonnegative")
        if self.el_mode not in ("auto", "enum", "mc"):
            raise ValueError(f"unknown el_mode {self.el_mode!r}")
        if self.hvp_mode not in ("fd_cd", "exact"):
            raise ValueError(f"unknown hvp_mode {self.hvp_mode!r}")

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["delta"]):
            d["delta"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hyperparameter(s): {sorted(unknown)}")
        d = dict(d)
        if isinstance(d.get("delta"), str):
            d["delta"] = float(d["delta"])
        return cls(**d)


@dataclass
class RunHistory:
    """Per-epoch records. ``objective`` is the epoch mean of the minibatch
    supervised term. ``penalty`` is the strategy's auxiliary term, unweighted:
    layer-1 reconstruction cross-entropy for DBN+loss and the squared
    lower-level gradient norm for the bilevel model. It is zero for the other
    strategies and in any epoch where the penalty weight is zero."""

    objective: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    train_error: list = field(default_factory=list)
    valid_error: list = field(default_factory=list)
    test_error: list = field(default_factory=list)
    pretrain_recon: list = field(default_factory=list)

    @property
    def n_epochs(self):
        return len(self.objective)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: list(v) for k, v in d.items()})
