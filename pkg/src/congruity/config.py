"""Run configuration: one dataclass mirrored by the CLI flags.

Defaults follow the reference hyperparameter table: shared width 200,
5 attention heads, 6 text-image and 3 text-knowledge cross-attention
layers, 2 graph-attention layers, batch 32, learning rate 2e-5, weight
decay 5e-3, dropout 0.5, text length cap 100, knowledge length cap 20.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError

ABLATIONS = ("full", "no_atomic", "no_mca_no_atomic", "no_composition")
SENTENCE_MODES = ("weighted", "uniform")
SENTENCE_WEIGHT_INPUTS = ("raw", "aligned")


@dataclass
class Config:
    d: int = 200
    h: int = 5
    mca_layers_text_image: int = 6
    mca_layers_text_knowledge: int = 3
    gat_layers: int = 2
    batch_size: int = 32
    lr: float = 2e-5
    weight_decay: float = 5e-3
    dropout: float = 0.5
    max_text_len: int = 100
    max_knowledge_len: int = 20
    grid_connectivity: int = 4
    sentence_mode: str = "weighted"
    # which text representation feeds the sentence pooling weights:
    # "raw" = projected pre-attention tokens, "aligned" = post-attention
    sentence_weights: str = "raw"
    ablation: str = "full"
    knowledge_enabled: bool = False
    seed: int = 0
    early_stop_patience: int = 5
    max_epochs: int = 100

    def validate(self) -> "Config":
        if self.d < 1 or self.h < 1:
            raise ConfigError(f"d and h must be positive, got d={self.d}, h={self.h}")
        if self.d % self.h != 0:
            raise ConfigError(f"head count h={self.h} must divide width d={self.d}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")
        if self.lr <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.weight_decay < 0.0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.grid_connectivity not in (4, 8):
            raise ConfigError(f"grid connectivity must be 4 or 8, got {self.grid_connectivity}")
        if self.sentence_mode not in SENTENCE_MODES:
            raise ConfigError(f"sentence_mode must be one of {SENTENCE_MODES}")
        if self.sentence_weights not in SENTENCE_WEIGHT_INPUTS:
            raise ConfigError(f"sentence_weights must be one of {SENTENCE_WEIGHT_INPUTS}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        for name in ("mca_layers_text_image", "mca_layers_text_knowledge", "gat_layers",
                     "batch_size", "max_text_len", "max_knowledge_len", "max_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.early_stop_patience < 0:
            raise ConfigError(f"early_stop_patience must be >= 0, got {self.early_stop_patience}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values).validate()


def _parse_value(field_type: type, raw: str):
    raw = raw.strip()
    if field_type is bool:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if field_type is int:
        return int(raw)
    if field_type is float:
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    """Parse a key=value config file ('#' starts a comment) into overrides."""
    path = Path(path)
    by_name = {f.name: f for f in fields(Config)}
    overrides: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in by_name:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        overrides[key] = _parse_value(type(by_name[key].default), raw)
    return overrides
