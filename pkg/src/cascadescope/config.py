"""Per-stage configuration schemas loaded from a TOML file."""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cascade import TIME_POINTS
from .topics import DEFAULT_GRID


class ConfigError(ValueError):
    """Invalid configuration; messages carry dotted field paths."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IngestConfig(_Section):
    strictness: Literal["strict", "lenient"] = "lenient"


class PreprocessConfig(_Section):
    filter: Literal["originals_only", "retweets_only", "all"] = "originals_only"
    stopwords: Optional[str] = None
    extra_stopwords: list[str] = ["coronavirus", "covid19", "19", "covid"]


class KeywordsConfig(_Section):
    patterns: Optional[str] = None
    filter: Literal["originals_only", "retweets_only", "all"] = "originals_only"
    window: int = Field(10, ge=1)


class VectorizeConfig(_Section):
    max_features: Optional[int] = Field(10_000, ge=1)
    ngram_min: int = Field(1, ge=1, le=2)
    ngram_max: int = Field(1, ge=1, le=2)
    top_k: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _range(self):
        if self.ngram_min > self.ngram_max:
            raise ValueError("ngram_min must not exceed ngram_max")
        return self


class _LdaCommon(_Section):
    iterations: int = Field(100, ge=1)
    passes: int = Field(2, ge=1)
    alpha: Optional[float] = Field(None, gt=0)
    eta: Optional[float] = Field(None, gt=0)
    top_n: int = Field(20, ge=1)


class SweepConfig(_LdaCommon):
    grid: list[int] = list(DEFAULT_GRID)
    window: int = Field(110, ge=1)

    @model_validator(mode="after")
    def _grid(self):
        if not self.grid or min(self.grid) < 1:
            raise ValueError("grid must be a non-empty list of positive integers")
        return self


class LdaConfig(_LdaCommon):
    k: Optional[int] = Field(None, ge=1)
    preset: Literal["sweep", "final"] = "final"


class CoherenceConfig(_Section):
    window: int = Field(110, ge=1)
    top_n: int = Field(20, ge=1)


class UmapConfig(_Section):
    n_neighbors: int = Field(15, ge=2)
    min_dist: float = Field(0.1, ge=0)
    epochs: Optional[int] = Field(None, ge=1)
    metric: Literal["hellinger", "euclidean"] = "hellinger"
    sample: Optional[int] = Field(None, ge=10)


class ChangepointConfig(_Section):
    n_bkps: Optional[int] = Field(10, ge=1)
    penalty: Optional[float] = Field(None, ge=0)
    span: float = Field(5.0, ge=1)
    event_time: Optional[str] = None

    @model_validator(mode="after")
    def _stop(self):
        if self.penalty is not None:
            self.n_bkps = None
        if self.n_bkps is None and self.penalty is None:
            raise ValueError("one of n_bkps or penalty is required")
        return self


class RetweetsConfig(_Section):
    linear_bin_s: float = Field(3600.0, gt=0)


class CascadeConfig(_Section):
    max_edges: int = Field(700, ge=1)
    rule: Literal["nearest", "at_most"] = "nearest"
    iterations: int = Field(200, ge=1)
    time_points: list[float] = [tp for _, tp in TIME_POINTS]


class PipelineConfig(_Section):
    ingest: IngestConfig = IngestConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    keywords: KeywordsConfig = KeywordsConfig()
    vectorize: VectorizeConfig = VectorizeConfig()
    sweep: SweepConfig = SweepConfig()
    lda: LdaConfig = LdaConfig()
    coherence: CoherenceConfig = CoherenceConfig()
    umap: UmapConfig = UmapConfig()
    changepoint: ChangepointConfig = ChangepointConfig()
    retweets: RetweetsConfig = RetweetsConfig()
    cascade: CascadeConfig = CascadeConfig()


def _format(err: ValidationError, prefix: str = "") -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in (prefix, *e["loc"]) if p != "")
        parts.append(f"{loc or '<root>'}: {e['msg']}")
    return "; ".join(parts)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(p)
    try:
        raw = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{p}: {_format(exc)}") from None


def section(cfg: PipelineConfig, stage: str, overrides: dict[str, Any]) -> _Section:
    """Stage section with non-None CLI overrides applied, then revalidated."""
    base = getattr(cfg, stage)
    merged = base.model_dump() | {k: v for k, v in overrides.items() if v is not None}
    try:
        return type(base).model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(_format(exc, stage)) from None
