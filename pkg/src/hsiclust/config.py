"""Flat key=value experiment configs.

One greppable line per setting, TOML-flavored scalars only (strings, ints,
floats, booleans, one-level lists). Command-line flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParameterError

_SOURCES = ("pixels", "sparse", "pca", "nmf")
_METHODS = ("kmeans", "spectral")
_FORMATS = ("npy", "hsraw")
_REDUCES = ("mean", "center")
_AFFINITIES = ("binary", "gaussian")


@dataclass
class PipelineConfig:
    """Everything one experiment needs, from ingest to clustering."""

    data: str = ""
    format: str = "npy"
    labels: str | None = None
    normalize: bool = True
    source: str = "sparse"
    method: str = "spectral"
    atoms: int | list = 0  # 0 = derive from data (twice the band count)
    sparsity: int | list = 5
    iterations: int = 5000
    lam: float = 0.0
    seed: int = 0
    batch: int = 1
    tile: list | None = None
    reduce: str = "center"
    clusters: int | None = None
    k_nn: int = 10
    affinity: str = "binary"
    sigma: float = 1.0
    pca_components: int = 50
    nmf_components: int = 8
    nmf_iters: int = 200
    allow_undercomplete: bool = False
    out: str = "."

    def validate(self) -> "PipelineConfig":
        if not self.data:
            raise ParameterError("config is missing 'data'")
        if self.format not in _FORMATS:
            raise ParameterError(f"format must be one of {_FORMATS}, got {self.format!r}")
        if self.source not in _SOURCES:
            raise ParameterError(f"source must be one of {_SOURCES}, got {self.source!r}")
        if self.method not in _METHODS:
            raise ParameterError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.reduce not in _REDUCES:
            raise ParameterError(f"reduce must be one of {_REDUCES}, got {self.reduce!r}")
        if self.affinity not in _AFFINITIES:
            raise ParameterError(
                f"affinity must be one of {_AFFINITIES}, got {self.affinity!r}"
            )
        if self.tile is not None:
            if len(self.tile) != 2 or any(not isinstance(v, int) for v in self.tile):
                raise ParameterError(f"tile must be two integers, got {self.tile!r}")
        return self

    def scalar(self, name: str) -> int:
        value = getattr(self, name)
        if isinstance(value, list):
            raise ParameterError(
                f"{name} is a list; lists are only valid for the grid command"
            )
        return value

    def value_list(self, name: str) -> list:
        value = getattr(self, name)
        return list(value) if isinstance(value, list) else [value]


def parse_value(text: str):
    """One scalar or a flat list of scalars, TOML style."""
    text = text.strip()
    if not text:
        raise ParameterError("empty value")
    if text.startswith("["):
        if not text.endswith("]"):
            raise ParameterError(f"unterminated list: {text!r}")
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [parse_value(part) for part in inner.split(",")]
    if (text.startswith('"') and text.endswith('"') and len(text) >= 2) or (
        text.startswith("'") and text.endswith("'") and len(text) >= 2
    ):
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text  # bare word: treat as string (handy for paths)


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ParameterError(f"line {lineno}: missing key")
        if key in values:
            raise ParameterError(f"line {lineno}: duplicate key {key!r}")
        values[key] = parse_value(value)
    return values


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Parse a config file, apply overrides (flags win), and validate."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    values = parse_config_text(text)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
    try:
        cfg = PipelineConfig(**values)
    except TypeError as exc:
        raise ParameterError(f"bad config: {exc}") from exc
    return cfg.validate()
