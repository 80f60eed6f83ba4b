"""Configuration management for ultrametric-wreath.

This module provides Pydantic-based configuration models for loading and validating
environment variables that control search guards, output rendering and corpus
generation.
"""

import logging
from typing import Optional

from pydantic import BaseModel, Field, field_validator

OUTPUT_FORMATS = ("json", "text")


class GuardConfig(BaseModel):
    """Limits applied to the exhaustive searches.

    Attributes:
        max_order (int): Largest group the closure and backtracking searches may enumerate.
        depth (Optional[int]): Truncation depth k for T_P trees (None means |Delta| + 2).
        wide_bound (int): The m used by the wideness and quasi-maximality checks.
        workers (int): Number of worker processes for corpus runs.
    """

    max_order: int = Field(1_000_000, description="Group enumeration guard")
    depth: Optional[int] = Field(None, description="Truncation depth k for T_P")
    wide_bound: int = Field(3, description="Bound m for wideness predicates")
    workers: int = Field(1, description="Worker processes for corpus runs")

    @field_validator("max_order")
    @classmethod
    def validate_max_order(cls, v: int) -> int:
        """Validate that the order guard is positive."""
        if v < 1:
            raise ValueError("max_order must be positive")
        return v

    @field_validator("depth")
    @classmethod
    def validate_depth(cls, v: Optional[int]) -> Optional[int]:
        """Validate that an explicit depth is positive (None is allowed)."""
        if v is not None and v < 1:
            raise ValueError("depth must be positive")
        return v

    @field_validator("wide_bound")
    @classmethod
    def validate_wide_bound(cls, v: int) -> int:
        """Validate that the wideness bound is positive."""
        if v < 1:
            raise ValueError("wide_bound must be positive")
        return v

    @field_validator("workers")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        """Validate that at least one worker is requested."""
        if v < 1:
            raise ValueError("workers must be at least 1")
        return v


class OutputConfig(BaseModel):
    """Report rendering options.

    Attributes:
        format (str): Either 'json' or 'text'.
        include_timings (bool): Whether reports carry wall-clock timings (breaks byte determinism).
    """

    format: str = Field("json", description="Output format (json or text)")
    include_timings: bool = Field(False, description="Record stage timings in reports")

    @field_validator("format")
    @classmethod
    def validate_format(cls, v: str) -> str:
        """Validate and normalize the output format."""
        normalized = v.strip().lower() if v else ""
        if normalized not in OUTPUT_FORMATS:
            raise ValueError(f"output format must be one of {', '.join(OUTPUT_FORMATS)}")
        return normalized


class CorpusConfig(BaseModel):
    """Random corpus generation settings.

    Attributes:
        seed (int): Seed for the pseudo-random generator.
        count (int): Number of spaces to generate.
        max_points (int): Largest space size (at most 7 to keep oracles tractable).
    """

    seed: int = Field(1, description="Corpus seed")
    count: int = Field(10, description="Number of generated spaces")
    max_points: int = Field(5, description="Maximum points per space")

    @field_validator("count")
    @classmethod
    def validate_count(cls, v: int) -> int:
        """Validate that the count is not negative."""
        if v < 0:
            raise ValueError("count cannot be negative")
        return v

    @field_validator("max_points")
    @classmethod
    def validate_max_points(cls, v: int) -> int:
        """Validate that spaces stay within oracle range."""
        if not 1 <= v <= 7:
            raise ValueError("max_points must be between 1 and 7")
        return v


class AppConfig(BaseModel):
    """Top-level application configuration.

    Attributes:
        guards (GuardConfig): Search limits.
        output (OutputConfig): Report rendering.
        corpus (CorpusConfig): Corpus generation.
        log_level (str): Name of the stdlib logging level.
    """

    guards: GuardConfig = Field(default_factory=GuardConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    log_level: str = Field("WARNING", description="Logging level name")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate that the log level is a known stdlib level name."""
        normalized = v.strip().upper() if v else ""
        if normalized not in logging.getLevelNamesMapping():
            raise ValueError(f"Unknown log level: {v!r}")
        return normalized


def _int_env(name: str) -> Optional[int]:
    import os

    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw.strip())
    except ValueError as e:
        raise ValueError(f"Invalid integer for {name}: {raw!r}") from e


def load_config() -> AppConfig:
    """Load and validate configuration from environment variables.

    Reads the following environment variables (all optional):
    - UMW_MAX_ORDER: Group enumeration guard (default 1000000)
    - UMW_DEPTH: Truncation depth for T_P trees
    - UMW_WIDE_BOUND: Bound m for wideness predicates (default 3)
    - UMW_WORKERS: Worker processes for corpus runs (default 1)
    - UMW_OUTPUT_FORMAT: 'json' or 'text' (default json)
    - UMW_INCLUDE_TIMINGS: '1'/'true' to record timings in reports
    - UMW_SEED: Corpus seed (default 1)
    - UMW_LOG_LEVEL: Logging level name (default WARNING)

    Returns:
        AppConfig: A validated configuration object.

    Raises:
        ValueError: If a variable is malformed or validation fails.
    """
    import os

    from pydantic import ValidationError

    guards: dict[str, Optional[int]] = {
        "max_order": _int_env("UMW_MAX_ORDER"),
        "depth": _int_env("UMW_DEPTH"),
        "wide_bound": _int_env("UMW_WIDE_BOUND"),
        "workers": _int_env("UMW_WORKERS"),
    }
    seed = _int_env("UMW_SEED")
    output_format = os.getenv("UMW_OUTPUT_FORMAT")
    timings = os.getenv("UMW_INCLUDE_TIMINGS", "").strip().lower() in ("1", "true", "yes")
    log_level = os.getenv("UMW_LOG_LEVEL")

    try:
        config = AppConfig(
            guards=GuardConfig(**{k: v for k, v in guards.items() if v is not None}),
            output=OutputConfig(
                format=output_format if output_format is not None else "json",
                include_timings=timings,
            ),
            corpus=CorpusConfig(seed=seed) if seed is not None else CorpusConfig(),
            log_level=log_level if log_level is not None else "WARNING",
        )
        return config
    except ValidationError as e:
        # Re-raise with more context
        raise ValueError(f"Configuration validation failed: {e}") from e
