"""Experiment orchestration: configs, checkpoints and error tables.

Checkpoint layout (all integers little-endian ``uint32``, all reals
little-endian ``float64``)::

    b"DBNCKPT1"
    n_layers
    (n_visible, n_hidden) for each layer
    n_classes
    parameter block: per layer W (row-major), b, c; then U (row-major), d
    has_best (uint8); if 1, a second parameter block for the best snapshot
    metadata length, then UTF-8 JSON (strategy, hyper, history, best_epoch, extra)
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import data as _data
from .classifier import ClassifierParams, Net, error_rate
from .dbn import DbnParams, pretrain_layerwise
from .hyper import Hyper, RunHistory
from .numerics import RngStream
from .rbm import RbmParams
from .strategies import (
    NEEDS_PRETRAINED,
    NEEDS_TWO_PHASE,
    MissingPrerequisiteError,
    Splits,
    StrategyId,
    TrainedModel,
    train,
)

CKPT_TAG = b"DBNCKPT1"


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


# ----------------------------------------------------------------------------
# config


def _reject_unknown(d, allowed, where):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


@dataclass
class DatasetSpec:
    """Where the data lives and how to cut it.

    ``train`` / ``test`` hold ``{"images": ..., "labels": ...}`` for the IDX
    loader or ``{"path": ...}`` for the delimited loader. When no test file is
    given, ``split`` cuts the training file three ways; otherwise the test
    ratio must be 0 and the test file is used as is.
    """

    loader: str = "idx"
    train: dict = field(default_factory=dict)
    test: dict = None
    label_column: int = -1
    delimiter: str = ","
    normalization: str = "none"
    classes: list = None
    binarize: bool = False
    subsample: float = 1.0
    split: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    split_seed: int = 0

    KEYS = (
        "loader", "train", "test", "label_column", "delimiter", "normalization",
        "classes", "binarize", "subsample", "split", "split_seed",
    )

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(d, cls.KEYS, "dataset")
        spec = cls(**d)
        if spec.loader not in ("idx", "delimited"):
            raise ConfigError(f"unknown loader {spec.loader!r}")
        if spec.normalization not in ("none", "minmax"):
            raise ConfigError(f"unknown normalization {spec.normalization!r}")
        if not 0 < spec.subsample <= 1:
            raise ConfigError("subsample must lie in (0, 1]")
        if len(spec.split) != 3 or not math.isclose(sum(spec.split), 1.0, abs_tol=1e-9):
            raise ConfigError("split must hold three ratios summing to 1")
        if spec.test is not None and spec.split[2] != 0:
            raise ConfigError("with a separate test file the test split ratio must be 0")
        return spec

    def to_dict(self):
        return {k: getattr(self, k) for k in self.KEYS}


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    architecture: list
    hyper: Hyper
    strategies: list
    seeds: list
    output_dir: str
    base_dir: str = "."

    KEYS = ("dataset", "architecture", "hyper", "strategies", "seeds", "output_dir")

    def __post_init__(self):
        if len(self.architecture) < 3:
            raise ConfigError("architecture needs input, at least one hidden layer and output sizes")
        if any(int(s) < 1 for s in self.architecture):
            raise ConfigError("layer sizes must be positive")
        if not self.strategies:
            raise ConfigError("strategy list is empty")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        try:
            self.strategies = [StrategyId(s) for s in self.strategies]
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategy")
        self.seeds = [int(s) for s in self.seeds]

    @property
    def dbn_sizes(self):
        return [int(s) for s in self.architecture[:-1]]

    @property
    def n_classes(self):
        return int(self.architecture[-1])

    @classmethod
    def from_dict(cls, d, base_dir="."):
        _reject_unknown(d, cls.KEYS, "config")
        missing = set(cls.KEYS) - set(d)
        if missing:
            raise ConfigError(f"missing key(s): {sorted(missing)}")
        try:
            hyper = Hyper.from_dict(d["hyper"])
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None
        return cls(
            DatasetSpec.from_dict(d["dataset"]),
            list(d["architecture"]),
            hyper,
            list(d["strategies"]),
            list(d["seeds"]),
            d["output_dir"],
            str(base_dir),
        )

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self):
        return {
            "dataset": self.dataset.to_dict(),
            "architecture": list(self.architecture),
            "hyper": self.hyper.to_dict(),
            "strategies": [s.value for s in self.strategies],
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }

    def resolve(self, p):
        return str(Path(self.base_dir) / p)


def default_config(name):
    """Shipped config for ``"mnist"``, ``"ni_20"``, ``"ni_30"``, ``"ni_40"`` or ``"isolet"``."""
    text = resources.files("dbnclass.configs").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return ExperimentConfig.from_dict(json.loads(text))


# ----------------------------------------------------------------------------
# data


def load_splits(cfg):
    """Load, optionally binarize, subsample and split the configured dataset."""
    spec = cfg.dataset
    rng = RngStream(spec.split_seed, stream_id=1)

    def load(part):
        if spec.loader == "idx":
            return _data.load_idx(cfg.resolve(part["images"]), cfg.resolve(part["labels"]), cfg.n_classes)
        return _data.load_delimited(
            cfg.resolve(part["path"]), spec.label_column, spec.delimiter, "none", classes=spec.classes
        )

    full = load(spec.train)
    if spec.subsample < 1:
        full = _data.stratified_subsample(full, spec.subsample, rng.child("subsample"))
    tr, va, te = _data.split(full, spec.split, rng.child("split"))
    if spec.test is not None:
        te = load(spec.test)
    if spec.normalization == "minmax":
        stats = _data.minmax_stats(tr.features)
        tr, va, te = (
            _data.RawDataset(_data.apply_minmax(p.features, stats), p.labels, p.n_classes)
            for p in (tr, va, te)
        )
    if spec.binarize:
        tr, va, te = (_data.binarize(p) for p in (tr, va, te))
    for p in (tr, va, te):
        p.n_classes = cfg.n_classes
    if tr.features.shape[1] != cfg.architecture[0]:
        raise ConfigError(
            f"data has {tr.features.shape[1]} features but architecture expects {cfg.architecture[0]}"
        )
    return Splits(tr.to_labeled(), va.to_labeled(), te.to_labeled())


# ----------------------------------------------------------------------------
# checkpoints


def _param_block(net):
    return net.flatten().astype("<f8").tobytes()


def checkpoint_bytes(model):
    net = model.net
    sizes = net.dbn.sizes
    out = [CKPT_TAG, struct.pack("<I", net.dbn.n_layers)]
    for J, I in zip(sizes[:-1], sizes[1:]):
        out.append(struct.pack("<II", J, I))
    out.append(struct.pack("<I", net.clf.n_classes))
    out.append(_param_block(net))
    if model.best is not None:
        out.append(b"\x01")
        out.append(_param_block(model.best))
    else:
        out.append(b"\x00")
    meta = {
        "strategy": model.strategy.value if model.strategy is not None else None,
        "hyper": model.hyper.to_dict() if model.hyper is not None else None,
        "history": model.history.to_dict(),
        "best_epoch": model.best_epoch,
        "extra": {k: v for k, v in model.extra.items() if isinstance(v, (str, int, float))},
    }
    mb = json.dumps(meta, sort_keys=True).encode("utf-8")
    out.append(struct.pack("<I", len(mb)))
    out.append(mb)
    return b"".join(out)


def save_checkpoint(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(model))


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointTruncatedError("checkpoint ends early")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def _read_net(r, dims, n_classes):
    layers = []
    for J, I in dims:
        W = np.frombuffer(r.take(8 * I * J), dtype="<f8").reshape(I, J).astype(np.float64)
        b = np.frombuffer(r.take(8 * J), dtype="<f8").astype(np.float64)
        c = np.frombuffer(r.take(8 * I), dtype="<f8").astype(np.float64)
        layers.append(RbmParams(W, b, c))
    top = dims[-1][1]
    U = np.frombuffer(r.take(8 * n_classes * top), dtype="<f8").reshape(n_classes, top).astype(np.float64)
    d = np.frombuffer(r.take(8 * n_classes), dtype="<f8").astype(np.float64)
    return Net(DbnParams(layers), ClassifierParams(U, d))


def checkpoint_from_bytes(buf):
    r = _Reader(buf)
    tag = r.take(len(CKPT_TAG))
    if tag != CKPT_TAG:
        raise CheckpointVersionError(f"unsupported checkpoint tag {tag!r}")
    n_layers = r.u32()
    if n_layers < 1:
        raise CheckpointDimensionError("checkpoint declares zero layers")
    dims = [(r.u32(), r.u32()) for _ in range(n_layers)]
    for (J0, I0), (J1, I1) in zip(dims[:-1], dims[1:]):
        if I0 != J1:
            raise CheckpointDimensionError("layer dimensions do not chain")
    if any(J < 1 or I < 1 for J, I in dims):
        raise CheckpointDimensionError("zero-width layer")
    n_classes = r.u32()
    if n_classes < 1:
        raise CheckpointDimensionError("zero classes")
    net = _read_net(r, dims, n_classes)
    best = _read_net(r, dims, n_classes) if r.take(1) == b"\x01" else None
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    if r.pos != len(buf):
        raise CheckpointDimensionError("trailing bytes after checkpoint")
    strategy = StrategyId(meta["strategy"]) if meta["strategy"] is not None else None
    hyper = Hyper.from_dict(meta["hyper"]) if meta["hyper"] is not None else None
    return TrainedModel(
        net, strategy, hyper, RunHistory.from_dict(meta["history"]), best, meta["best_epoch"],
        dict(meta.get("extra", {})),
    )


def load_checkpoint(path):
    return checkpoint_from_bytes(Path(path).read_bytes())


# ----------------------------------------------------------------------------
# experiment


@dataclass
class Report:
    """Per-strategy test errors (fractions) keyed by seed, plus failures and histories."""

    strategies: list
    seeds: list
    errors: dict = field(default_factory=dict)  # strategy -> {seed: error}
    failures: dict = field(default_factory=dict)  # strategy -> {seed: "category: message"}
    histories: dict = field(default_factory=dict)  # "strategy/seed" -> RunHistory dict
    ddof: int = 1

    def seed_errors(self, strategy):
        return [self.errors.get(strategy, {}).get(s) for s in self.seeds]

    def mean(self, strategy):
        v = [e for e in self.seed_errors(strategy) if e is not None]
        return float(np.mean(v)) if v else float("nan")

    def sd(self, strategy):
        v = [e for e in self.seed_errors(strategy) if e is not None]
        if len(v) <= self.ddof:
            return float("nan")
        return float(np.std(v, ddof=self.ddof))

    def to_dict(self):
        return {
            "strategies": list(self.strategies),
            "seeds": list(self.seeds),
            "errors": {k: {str(s): e for s, e in v.items()} for k, v in self.errors.items()},
            "failures": {k: {str(s): e for s, e in v.items()} for k, v in self.failures.items()},
            "histories": self.histories,
            "ddof": self.ddof,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["strategies"],
            d["seeds"],
            {k: {int(s): e for s, e in v.items()} for k, v in d["errors"].items()},
            {k: {int(s): e for s, e in v.items()} for k, v in d["failures"].items()},
            d["histories"],
            d.get("ddof", 1),
        )


def _fmt_pct(v):
    return "NA" if v is None or not np.isfinite(v) else f"{100.0 * v:.2f}"


def emit_report(report, path):
    """Tab-separated error table: strategy, mean %, sd %, then one column per seed."""
    lines = ["\t".join(["strategy", "mean_pct", "sd_pct"] + [f"seed_{s}" for s in report.seeds])]
    for name in report.strategies:
        cells = [name, _fmt_pct(report.mean(name)), _fmt_pct(report.sd(name))]
        for s in report.seeds:
            if s in report.failures.get(name, {}):
                cells.append("ERR")
            else:
                cells.append(_fmt_pct(report.errors.get(name, {}).get(s)))
        lines.append("\t".join(cells))
    text = "\n".join(lines) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return text


def error_category(exc):
    if isinstance(exc, MissingPrerequisiteError):
        return "prerequisite"
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, _data.DataFormatError):
        return "data"
    if isinstance(exc, CheckpointError):
        return "checkpoint"
    return "runtime"


def pretrain_for_seed(cfg, splits, seed):
    history = RunHistory()
    rng = RngStream(seed).child("pretrain")
    dbn = pretrain_layerwise(cfg.dbn_sizes, splits.train.inputs, cfg.hyper, rng, history=history)
    return dbn, history


def pretrain_model(dbn, history, cfg):
    return TrainedModel(
        Net(dbn, ClassifierParams.zeros(dbn.layers[-1].n_hidden, cfg.n_classes)),
        None, cfg.hyper, history,
    )


def _sha256(b):
    return hashlib.sha256(b).hexdigest()


def run_experiment(cfg, splits=None, write=True, log=None):
    """Train every configured (strategy, seed) cell and collect test errors.

    Within a seed the pretrained stack and the two-phase (DBN_FFN) snapshot
    are computed once and shared by every strategy that needs them. A
    failing cell is recorded and the rest of the run continues. Test error
    is measured on the lowest-validation-error snapshot of each run.
    """
    if splits is None:
        splits = load_splits(cfg)
    out = Path(cfg.resolve(cfg.output_dir))
    names = [s.value for s in cfg.strategies]
    report = Report(names, list(cfg.seeds))
    say = log or (lambda msg: None)

    for seed in cfg.seeds:
        root = RngStream(seed)
        cache = {}

        def pretrained():
            if "pretrained" not in cache:
                say(f"seed {seed}: pretraining {cfg.dbn_sizes}")
                dbn, hist = pretrain_for_seed(cfg, splits, seed)
                cache["pretrained"] = dbn
                if write:
                    save_checkpoint(pretrain_model(dbn, hist, cfg), out / "checkpoints" / f"pretrain_seed{seed}.ckpt")
            return cache["pretrained"]

        def run(strategy):
            if strategy in cache:
                return cache[strategy]
            kw = {}
            if strategy in NEEDS_PRETRAINED:
                kw["pretrained"] = pretrained()
            if strategy in NEEDS_TWO_PHASE:
                two = run(StrategyId.DBN_FFN)
                kw["two_phase"] = two.best
            say(f"seed {seed}: training {strategy.value}")
            model = train(strategy, splits, cfg.hyper, root.child("strategy", strategy.value),
                          sizes=cfg.dbn_sizes, **kw)
            if strategy is StrategyId.DBN_FFN:
                snap = TrainedModel(model.best, strategy, cfg.hyper, RunHistory())
                blob = checkpoint_bytes(snap)
                model.extra["snapshot_sha256"] = _sha256(blob)
                if write:
                    p = out / "checkpoints" / f"two_phase_seed{seed}.ckpt"
                    p.parent.mkdir(parents=True, exist_ok=True)
                    p.write_bytes(blob)
            if strategy in NEEDS_TWO_PHASE:
                ref = TrainedModel(kw["two_phase"], StrategyId.DBN_FFN, cfg.hyper, RunHistory())
                model.extra["reference_sha256"] = _sha256(checkpoint_bytes(ref))
            cache[strategy] = model
            return model

        for strategy in cfg.strategies:
            try:
                model = run(strategy)
            except Exception as exc:  # noqa: BLE001 - cell failures are recorded, not raised
                report.failures.setdefault(strategy.value, {})[seed] = f"{error_category(exc)}: {exc}"
                continue
            err = error_rate(model.best, splits.test)
            report.errors.setdefault(strategy.value, {})[seed] = err
            report.histories[f"{strategy.value}/{seed}"] = model.history.to_dict()
            if write:
                save_checkpoint(model, out / "checkpoints" / f"{strategy.value}_seed{seed}.ckpt")

    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.json").write_text(json.dumps(report.to_dict(), sort_keys=True), encoding="utf-8")
        emit_report(report, out / "report.tsv")
    return report
