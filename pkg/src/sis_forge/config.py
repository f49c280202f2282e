"""Experiment configuration and its ``key = value`` text format.

::

    # comments start with '#'
    [system]
    frequency_hz = 3e9
    nt = 484
    [training]
    objective = svd_gap
    [experiment]
    sweep_n = 49, 100

Keys may also appear before any section header. A key placed under a
section must belong to it; unknown keys are rejected. ``alpha1``,
``alpha2`` and ``alpha3`` set both sides; ``alpha1_t``, ``alpha1_r`` etc.
set one.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .objectives import CE_LOGITS, OBJECTIVES, SVD_SOURCES

OPTIMIZERS = ("adam", "sgd")


@dataclass
class TrainConfig:
    # link physics
    frequency_hz: float = 3e9
    tx_power_dbm: float = 1.0
    noise_dbm: float = -120.0
    rician_kappa: float = 15.0
    distance_m: float = 50.0
    mt: int = 4
    mr: int = 4
    nt: int = 484
    nr: int = 484
    lt: int = 3
    lr: int = 3
    alpha1_t: float = 4.0
    alpha2_t: float = 0.5
    alpha3_t: float = 6.0
    alpha1_r: float = 4.0
    alpha2_r: float = 0.5
    alpha3_r: float = 6.0
    antenna_height_m: float = 15.0
    # training
    constellation: str = "4-QAM"
    objective: str = "ser_ce"
    ce_logits: str = "marginal"
    svd_source: str = "channel"
    optimizer: str = "adam"
    learning_rate: float = 0.01
    batch_size: int = 256
    symbols_per_block: int = 1
    epochs: int = 50
    batches_per_epoch: int = 20
    seed: int = 0
    test_realizations: int = 20
    test_symbols: int = 2000
    chunk_size: int = 16

    @property
    def tx_power_w(self) -> float:
        return 10 ** (self.tx_power_dbm / 10) * 1e-3

    @property
    def noise_var(self) -> float:
        return 10 ** (self.noise_dbm / 10) * 1e-3

    def replace(self, **changes) -> "TrainConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def validate(self):
        counts = ("mt", "mr", "nt", "nr", "lt", "lr", "batch_size", "symbols_per_block",
                  "batches_per_epoch", "test_realizations", "test_symbols", "chunk_size")
        for name in counts:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        for name in ("nt", "nr"):
            v = getattr(self, name)
            if math.isqrt(v) ** 2 != v:
                raise ConfigError(f"{name} = {v} is not a perfect square")
        if math.isnan(self.rician_kappa):
            raise ConfigError("rician_kappa must be a number (inf selects pure line of sight)")
        for name in ("frequency_hz", "tx_power_dbm", "noise_dbm", "distance_m"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.frequency_hz <= 0 or self.distance_m <= 0:
            raise ConfigError("frequency_hz and distance_m must be positive")
        if self.rician_kappa < 0:
            raise ConfigError("rician_kappa must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if self.ce_logits not in CE_LOGITS:
            raise ConfigError(f"ce_logits must be one of {CE_LOGITS}")
        if self.svd_source not in SVD_SOURCES:
            raise ConfigError(f"svd_source must be one of {SVD_SOURCES}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        from .modem import get_constellation
        try:
            get_constellation(self.constellation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ExperimentSpec:
    base: TrainConfig = field(default_factory=TrainConfig)
    sweep_n: list = field(default_factory=lambda: [49, 64, 100, 169, 256, 361, 484, 625, 784])
    sweep_l: list = field(default_factory=lambda: [2, 5])
    objectives: list = field(default_factory=lambda: list(OBJECTIVES))
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "results"

    def validate(self):
        self.base.validate()
        for n in self.sweep_n:
            if n < 1 or math.isqrt(n) ** 2 != n:
                raise ConfigError(f"sweep_n value {n} is not a perfect square")
        for l in self.sweep_l:
            if l < 1:
                raise ConfigError("sweep_l values must be >= 1")
        for o in self.objectives:
            if o not in OBJECTIVES:
                raise ConfigError(f"unknown objective {o!r}")
        if not (self.sweep_n and self.sweep_l and self.objectives and self.seeds):
            raise ConfigError("sweep lists must be non-empty")


_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_SYSTEM_KEYS = {"frequency_hz", "tx_power_dbm", "noise_dbm", "rician_kappa", "distance_m",
                "mt", "mr", "nt", "nr", "lt", "lr", "antenna_height_m",
                "alpha1", "alpha2", "alpha3",
                "alpha1_t", "alpha2_t", "alpha3_t", "alpha1_r", "alpha2_r", "alpha3_r"}
_TRAINING_KEYS = set(_TRAIN_FIELDS) - _SYSTEM_KEYS
_EXPERIMENT_KEYS = {"sweep_n", "sweep_l", "objectives", "seeds", "out_dir"}
SECTIONS = {"system": _SYSTEM_KEYS, "training": _TRAINING_KEYS, "experiment": _EXPERIMENT_KEYS}


def _convert(kind, raw):
    if kind is int:
        f = float(raw)
        if not f.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(f)
    if kind is float:
        return float(raw)
    return raw


def _int_list(raw):
    return [_convert(int, tok) for tok in raw.replace(",", " ").split()]


def parse_config_text(text: str, path=None) -> ExperimentSpec:
    spec = ExperimentSpec()
    values = {}
    section = None
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]") or s[1:-1].strip() not in SECTIONS:
                raise ConfigError(f"unknown section {s!r}", lineno, path)
            section = s[1:-1].strip()
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", lineno, path)
        key, raw = (p.strip() for p in s.split("=", 1))
        owner = next((name for name, keys in SECTIONS.items() if key in keys), None)
        if owner is None:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if section is not None and owner != section:
            raise ConfigError(f"key {key!r} belongs to [{owner}], not [{section}]", lineno, path)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno, path)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", lineno, path)
        seen[key] = lineno
        try:
            if key in ("sweep_n", "sweep_l", "seeds"):
                setattr(spec, key, _int_list(raw))
            elif key == "objectives":
                spec.objectives = [t for t in raw.replace(",", " ").split()]
            elif key == "out_dir":
                spec.out_dir = raw
            elif key in ("alpha1", "alpha2", "alpha3"):
                v = float(raw)
                values.setdefault(f"{key}_t", (v, lineno))
                values.setdefault(f"{key}_r", (v, lineno))
            else:
                kind = _TRAIN_FIELDS[key].type
                kind = {"int": int, "float": float, "str": str}.get(kind, kind)
                values[key] = (_convert(kind, raw), lineno)
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {exc}", lineno, path) from None
    for key, (v, lineno) in values.items():
        setattr(spec.base, key, v)
    try:
        spec.validate()
    except ConfigError as exc:
        bad = next((k for k in seen if k in str(exc)), None)
        raise ConfigError(str(exc), seen.get(bad), path) from None
    return spec


def parse_config(path) -> ExperimentSpec:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}", path=p)
    return parse_config_text(p.read_text(), path=p)
