"""Service and pipeline run configuration.

One JSON file configures the server: model container path, gallery
path, result count, network binding, worker counts, and the feature /
VAD / adaptation parameters. The VOICERANK_CONFIG environment variable
overrides the config path when set. Unknown keys are rejected so typos
fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .audio import FeatureConfig

ENV_CONFIG_PATH = "VOICERANK_CONFIG"

MAX_UPLOAD_BYTES = 10 * 1024 * 1024


def _default_methods() -> dict:
    # method name -> pipeline; the platform design allows several
    # methods behind one service, only celebrity matching ships.
    return {"celebrity-match": "identify"}


@dataclass
class ServiceConfig:
    """Everything the serve path needs, with sane desk-scale defaults."""

    model_path: str = "models.vrk"
    gallery_path: str = ""
    host: str = "127.0.0.1"
    port: int = 8200
    top_k: int = 5
    score_workers: int = 1
    max_upload_bytes: int = MAX_UPLOAD_BYTES
    min_duration_s: float = 1.0
    max_duration_s: float = 60.0
    map_relevance: float = 16.0
    web_dir: str = ""
    methods: dict = field(default_factory=_default_methods)
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            value = getattr(self, f.name)
            doc[f.name] = value.to_dict() if f.name == "features" else value
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ServiceConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        if "features" in kwargs:
            kwargs["features"] = FeatureConfig.from_dict(kwargs["features"])
        return cls(**kwargs)


def resolve_config_path(explicit=None):
    """Explicit path beats the environment variable beats nothing."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(ENV_CONFIG_PATH)
    return Path(env) if env else None


def load_config(path=None) -> ServiceConfig:
    """Load config JSON from path / $VOICERANK_CONFIG, else defaults."""
    resolved = resolve_config_path(path)
    if resolved is None:
        return ServiceConfig()
    with open(resolved) as fh:
        return ServiceConfig.from_dict(json.load(fh))


def save_config(path, config: ServiceConfig):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")
