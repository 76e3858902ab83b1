"""Pipeline configuration, serialisable to a single JSON document."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Literal

from .discretize import SaxConfig
from .mining import MiningConfig
from .network import NetworkParams
from .series import WindowSpec


@dataclass(frozen=True)
class DiscreteParams:
    no_symbols: int = 10
    no_bins: int = 5
    binning: Literal["global", "local", "kmeans"] = "global"


@dataclass(frozen=True)
class PipelineConfig:
    window: int = 100
    increment: int = 1
    discrete: DiscreteParams = DiscreteParams()
    # Benchmarks run with min_len=2; MiningConfig itself defaults to 3.
    mining: MiningConfig = MiningConfig(k=10000, min_len=2, rdur=1.2)
    scoring: Literal["iforest", "fpof"] = "iforest"
    trees: int = 500
    use_network: bool = True
    network: NetworkParams = NetworkParams()
    cap_quantile: float = 0.99
    straight_line_r: float = 0.98
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.scoring not in ("iforest", "fpof"):
            raise ValueError(f"unknown scoring mode {self.scoring!r}")
        self.window_spec()
        self.sax_config()

    def window_spec(self) -> WindowSpec:
        return WindowSpec(self.window, self.increment)

    def sax_config(self) -> SaxConfig:
        return SaxConfig.for_window(
            self.window, self.discrete.no_symbols, no_bins=self.discrete.no_bins, binning=self.discrete.binning, seed=self.seed
        )

    def with_(self, **changes) -> "PipelineConfig":
        """``replace`` that also accepts nested keys such as ``no_bins`` or ``rdur``."""
        top, disc, mine, net = {}, {}, {}, {}
        names = {
            "discrete": {f.name for f in fields(DiscreteParams)},
            "mining": {f.name for f in fields(MiningConfig)},
            "network": {f.name for f in fields(NetworkParams)},
        }
        for k, v in changes.items():
            if k in {f.name for f in fields(PipelineConfig)}:
                top[k] = v
            elif k in names["discrete"]:
                disc[k] = v
            elif k in names["mining"]:
                mine[k] = v
            elif k in names["network"]:
                net[k] = v
            else:
                raise KeyError(f"unknown config key {k!r}")
        cfg = self
        if disc:
            top["discrete"] = replace(top.get("discrete", cfg.discrete), **disc)
        if mine:
            top["mining"] = replace(top.get("mining", cfg.mining), **mine)
        if net:
            top["network"] = replace(top.get("network", cfg.network), **net)
        return replace(cfg, **top)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        if "discrete" in d:
            d["discrete"] = DiscreteParams(**d["discrete"])
        if "mining" in d:
            d["mining"] = MiningConfig(**d["mining"])
        if "network" in d:
            d["network"] = NetworkParams(**d["network"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def apply_env(config: PipelineConfig) -> PipelineConfig:
    """PADMINER_SEED and PADMINER_THREADS override the file values."""
    changes = {}
    if os.environ.get("PADMINER_SEED"):
        changes["seed"] = int(os.environ["PADMINER_SEED"])
    if os.environ.get("PADMINER_THREADS"):
        changes["threads"] = int(os.environ["PADMINER_THREADS"])
    return config.with_(**changes) if changes else config
