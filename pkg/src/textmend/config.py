"""Run configuration: defaults, flat config file, environment, CLI flags.

Precedence, lowest to highest: built-in defaults, config file, environment
variables (``TEXTMEND_<KEY>``), explicit flag values.  The resolved
configuration hashes into every output header so runs can be told apart.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .fileio import config_hash
from .pipeline import PipelineConfig

ENV_PREFIX = "TEXTMEND_"


@dataclass(frozen=True)
class RunConfig:
    backend_url: str = ""
    model: str = "default"
    timeout: float = 30.0
    max_retries: int = 3
    temperature: float = 0.0
    embed_url: str = ""
    embed_dim: int = 64
    retrieve_top_k: int = 5
    mlr_rounds: int = 4
    adse_limit: int = 4
    nbest_top: int = 5
    n_neg: int = 5
    batch_size: int = 32
    workers: int = 0  # 0 = logical CPU count
    seed: int = 0

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.n_neg < 0:
            raise ConfigError("n_neg must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        try:
            self.pipeline()  # validates the pipeline fields
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            retrieve_top_k=self.retrieve_top_k,
            mlr_rounds=self.mlr_rounds,
            adse_limit=self.adse_limit,
            nbest_top=self.nbest_top,
            seed=self.seed,
        )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def hash(self) -> str:
        # workers/batch_size shape execution, not results; two runs that
        # differ only there are the same run for traceability purposes
        values = self.as_dict()
        values.pop("workers")
        values.pop("batch_size")
        return config_hash(values)

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: {raw!r} is not a number") from exc
    return raw


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, blanks skipped."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    environ = os.environ if environ is None else environ
    values: dict = {}
    for key in _FIELD_TYPES:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _coerce(key, raw)
    return values


def resolve_config(
    file_path: str | Path | None = None,
    flags: Mapping | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Merge all four layers into one validated RunConfig."""
    values: dict = {}
    if file_path is not None:
        values.update(read_config_file(file_path))
    values.update(env_overrides(environ))
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config flag {key!r}")
        values[key] = value
    return RunConfig(**values)
