"""Flat INI-style pipeline configuration, named sub-seeds, run manifests.

Every value lives under a section as key=value and can be overridden on the
command line with --section.key value. Randomness flows from the single
[run] seed through crc32-named sub-streams so modules stay independent.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import zlib
from dataclasses import dataclass, field
from datetime import date as Date, datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError

DEFAULTS: dict[str, dict[str, str]] = {
    "data": {
        "btc": "",
        "eth": "",
        "gold": "",
        "embeddings": "",
    },
    "run": {
        "seed": "7",
        "output_dir": "out",
        "task": "up5",
        "split_date": "2020-06-01",
    },
    "indicators": {
        "ema_alpha": "0.67",
    },
    "features": {
        "window": "5",
        "label_source": "highlow",
    },
    "svm": {
        "kernel": "rbf",
        "c_grid": "1,10,30,50,100,500,1000",
        "gamma_grid": "0.1,0.5,1,10,50",
        "folds": "4",
        "tol": "1e-3",
        "max_passes": "100000",
    },
    "neural": {
        "max_slices": "362",
        "parallel_filters": "100",
        "parallel_dense": "2048,512",
        "seq_kernels": "5,4,3",
        "seq_channels": "8,16,32",
        "seq_pools": "2,2,2",
        "seq_dense": "59",
        "dropout": "0.5",
        "epochs": "50",
        "batch_size": "32",
        "patience": "5",
        "lr": "0.001",
        "weight_decay": "0.0005",
        "loss": "auto",
        "focal_alpha": "0.12",
        "focal_gamma": "1.0",
        "dtype": "float64",
    },
    "fusion": {
        "model": "auto",
        "mode": "out-of-fold",
        "twitter_arch": "parallel",
        "c_grid": "10,30,100,500",
        "gamma_grid": "1,10,50",
        "logistic_l2": "1e-4",
    },
    "backtest": {
        "taus": "0.5,0.95,0.99",
        "signal_tau": "0.5",
        "annualization": "365",
        "bull_days": "150,350",
        "bear_days": "315,365",
        "hold_through_signals": "false",
    },
}


@dataclass
class PipelineConfig:
    values: dict[str, dict[str, str]] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict[str, str] | None = None) -> "PipelineConfig":
        values = {section: dict(keys) for section, keys in DEFAULTS.items()}
        if path is not None:
            parser = configparser.ConfigParser(interpolation=None)
            read = parser.read(str(path))
            if not read:
                raise ConfigError(f"config file not found: {path}")
            for section in parser.sections():
                if section not in values:
                    raise ConfigError(f"unknown config section [{section}]")
                for key, value in parser.items(section):
                    if key not in values[section]:
                        raise ConfigError(f"unknown config key {section}.{key}")
                    values[section][key] = value
        for dotted, value in (overrides or {}).items():
            if "." not in dotted:
                raise ConfigError(f"override {dotted!r} must be section.key")
            section, key = dotted.split(".", 1)
            if section not in values or key not in values[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            values[section][key] = value
        return cls(values=values)

    # typed accessors ------------------------------------------------------
    def get(self, section: str, key: str) -> str:
        try:
            return self.values[section][key]
        except KeyError:
            raise ConfigError(f"unknown config key {section}.{key}") from None

    def get_int(self, section: str, key: str) -> int:
        raw = self.get(section, key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key} must be an integer, got {raw!r}") from None

    def get_float(self, section: str, key: str) -> float:
        raw = self.get(section, key)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key} must be a number, got {raw!r}") from None

    def get_bool(self, section: str, key: str) -> bool:
        raw = self.get(section, key).strip().lower()
        if raw in ("true", "1", "yes", "on"):
            return True
        if raw in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key} must be a boolean, got {raw!r}")

    def get_date(self, section: str, key: str) -> Date:
        raw = self.get(section, key)
        try:
            return Date.fromisoformat(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key} must be YYYY-MM-DD, got {raw!r}") from None

    def get_floats(self, section: str, key: str) -> tuple[float, ...]:
        raw = self.get(section, key)
        try:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"{section}.{key} must be comma-separated numbers") from None

    def get_ints(self, section: str, key: str) -> tuple[int, ...]:
        raw = self.get(section, key)
        try:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"{section}.{key} must be comma-separated integers") from None

    def get_path(self, section: str, key: str) -> Path:
        raw = self.get(section, key)
        if not raw:
            raise ConfigError(f"{section}.{key} is not set")
        return Path(raw)

    @property
    def seed(self) -> int:
        return self.get_int("run", "seed")

    @property
    def output_dir(self) -> Path:
        return Path(self.get("run", "output_dir"))

    def snapshot(self) -> dict:
        return {s: dict(k) for s, k in sorted(self.values.items())}


def sub_seed(seed: int, name: str) -> np.random.SeedSequence:
    """A named, reproducible child of the root seed."""
    return np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))])


def rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(sub_seed(seed, name))


def seed_int(seed: int, name: str) -> int:
    """A 32-bit integer seed derived from the named stream."""
    return int(sub_seed(seed, name).generate_state(1)[0])


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    cfg: PipelineConfig,
    command: str,
    artifacts: list[Path],
    out_dir: Path,
    started: datetime,
) -> Path:
    """Record the config snapshot, code version, and artifact checksums."""
    payload = {
        "command": command,
        "version": __version__,
        "config": cfg.snapshot(),
        "started_utc": started.isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "artifacts": {
            str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(artifacts)
        },
    }
    path = out_dir / f"manifest_{command.replace(':', '_')}.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    return path
