"""Flat ``key = value`` run configuration.

Precedence: command-line flags > config file > defaults. Lines starting
with ``#`` and blank lines are ignored; keys use the long flag names with
dashes or underscores (``eta``, ``n-t``).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, asdict
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 500
    beta: float = 2.0
    eta: float = 0.01
    gamma: float = 1e-3
    delta: float = 1.0 / 22.0
    seed: int = 0
    measure: str | None = None
    backend: str = "dense"
    out: str = "runs"
    suite: str = "fast"
    m: int = 100
    n_t: int = 2000
    n_x: int = 2001
    paths: int = 100_000
    dt: float = 5e-4
    seeds: int = 5
    alpha: float = 0.25
    diag: str = "iid"

    def to_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    if raw.lower() in ("none", "") and "None" in str(kind):
        return None
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def resolve(cli: dict, path=None) -> RunConfig:
    """Merge defaults, the optional file and the explicitly given CLI values (non-None)."""
    merged = RunConfig().to_dict()
    if path is not None:
        merged.update(read_config(path))
    merged.update({k: v for k, v in cli.items() if v is not None and k in _TYPES})
    return RunConfig(**merged)
