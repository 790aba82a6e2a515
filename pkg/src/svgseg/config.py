"""Pipeline configuration.

One flat record covering graph construction, network dimensions, and
optimizer settings. Configs load from TOML files, flags override file
values, and every command writes the effective config next to its outputs
so a run can be reproduced exactly.
"""
from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .graph_builder import GraphConfig, node_feature_dim
from .gat_network import TrainConfig

SEED_ENV_VAR = "VG_SEED"


@dataclass(frozen=True)
class PipelineConfig:
    # graph construction
    k: int = 6
    random_fraction: float = 0.05
    n_max: int = 32
    contiguity_tol: float = 1e-3
    seed: int = 0
    samples: int = 64
    curvature_intervals: int = 16
    # aggregation of rare layers into the catch-all class
    rare_threshold: float = 1 / 3
    # network
    d_hidden: int = 672
    leaky_slope: float = 0.2
    # optimization
    lr: float = 1e-3
    epochs: int = 100
    optimizer: str = "adam"
    head_loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    val_fraction: float = 0.0
    # labels
    label_map: str = "tum"

    @property
    def node_dim(self) -> int:
        return node_feature_dim(self.n_max)

    def graph_config(self) -> GraphConfig:
        return GraphConfig(
            k=self.k, random_fraction=self.random_fraction, n_max=self.n_max,
            contiguity_tol=self.contiguity_tol, seed=self.seed,
            samples=self.samples, curvature_intervals=self.curvature_intervals)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, epochs=self.epochs, seed=self.seed,
            optimizer=self.optimizer,
            head_loss_weights=tuple(self.head_loss_weights))


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an optional TOML file plus explicit overrides.

    The VG_SEED environment variable, when set, wins over both.
    """
    values: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        known = {f.name for f in fields(PipelineConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    if os.environ.get(SEED_ENV_VAR):
        values["seed"] = int(os.environ[SEED_ENV_VAR])
    if "head_loss_weights" in values:
        values["head_loss_weights"] = tuple(float(w)
                                            for w in values["head_loss_weights"])
    return PipelineConfig(**values)


def write_effective_config(cfg: PipelineConfig, out_dir) -> Path:
    """Write the run's effective settings as flat TOML."""
    lines = ["# effective configuration of this run"]
    for key, value in asdict(cfg).items():
        if isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        elif isinstance(value, tuple):
            lines.append(f"{key} = [{', '.join(repr(float(v)) for v in value)}]")
        elif isinstance(value, bool):
            lines.append(f"{key} = {str(value).lower()}")
        else:
            lines.append(f"{key} = {value!r}")
    out = Path(out_dir) / "effective_config.toml"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out
