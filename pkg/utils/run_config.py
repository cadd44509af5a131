"""
Run configuration: a pydantic model with a default for every key, read from
line-oriented `key = value` files and merged with CLI flags.

Precedence is defaults < config file < CLI flags.
"""

from pathlib import Path
from typing import List

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config import DEFAULT_SLACK, ENUMERATION_CAP, default_workers
from core.errors import ConfigError

load_dotenv()


def _int_list(value):
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        return [int(p) for p in parts]
    if isinstance(value, int):
        return [value]
    return list(value)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    subcommand: str = ""
    process: str = "markov"
    schedule: List[int] = Field(default_factory=lambda: [5, 9, 15])
    T: int = 10_000
    p: float = 1.0
    # A single integer n means seeds 0..n-1.
    seeds: List[int] = Field(default_factory=lambda: list(range(5)))
    out: str = ""
    data: str = ""
    enumeration_cap: int = ENUMERATION_CAP
    slack: float = DEFAULT_SLACK
    workers: int = Field(default_factory=default_workers)
    k: List[int] = Field(default_factory=lambda: [3])
    scheme: str = "sample_mean"
    reference: str = "full_past"
    k_max: int = 5
    n_seeds: int = 200
    horizon: int = 4096
    generator: str = "coin"
    n_max: int = 100_000
    # Order of the moment the martingale differences keep finite; shape 0 derives the pareto shape from it.
    moment: float = 2.0
    shape: float = 0.0

    @field_validator("schedule", "k", mode="before")
    @classmethod
    def _split(cls, value):
        return _int_list(value)

    @field_validator("seeds", mode="before")
    @classmethod
    def _seeds(cls, value):
        if isinstance(value, int) or (isinstance(value, str) and "," not in value and value.strip().isdigit()):
            return list(range(int(value)))
        return _int_list(value)

    @field_validator("workers")
    @classmethod
    def _positive(cls, value):
        if value < 1:
            raise ValueError("workers must be at least 1")
        return value

    @field_validator("slack")
    @classmethod
    def _slack(cls, value):
        if not 0.0 <= value < 1.0:
            raise ValueError("slack must be in [0, 1)")
        return value


def _parse_lines(text: str, source: str) -> dict:
    values = {}
    fields = RunConfig.model_fields
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            RunConfig(**{key: value})
        except ValidationError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {e.errors()[0]['msg']}") from None
        values[key] = value
    return values


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    return RunConfig(**_parse_lines(text, str(path)))


def merge(base: RunConfig, overrides: dict) -> RunConfig:
    """base with every non-None override applied."""
    data = base.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def _format_value(value) -> str:
    if isinstance(value, list):
        # Trailing comma keeps a one-element seed list from reading as a count.
        return ",".join(str(v) for v in value) + ("," if len(value) == 1 else "")
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """`key = value` block that load_config reads back to an equal RunConfig."""
    lines = []
    for key, value in cfg.model_dump().items():
        text = _format_value(value)
        if text == "":
            lines.append(f"# {key} =")
        else:
            lines.append(f"{key} = {text}")
    return "\n".join(lines)

