"""Run configuration, flat key=value config files and CSV provenance."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from .ist import WORKERS_ENV, default_workers


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = ""
    n: Optional[int] = None
    l: Optional[float] = None
    m: int = 11
    tol: float = 1e-14
    maxit: int = 200
    k: List[complex] = field(default_factory=list)
    t: float = 0.8
    nt: int = 10_000
    q0: str = "builtin:gaussian"
    out: str = "."
    workers: int = 1
    seed: int = 0
    method: str = "iterated"
    sublattice: int = 0
    stride: int = 100
    dispersion: float = 0.5
    plot: bool = False

    # Fields that do not influence results and stay out of the hash.
    _UNHASHED = ("out", "workers", "plot")

    def validate(self) -> "RunConfig":
        if self.n is not None and (self.n < 2 or self.n % 2):
            raise ConfigError(f"n must be a positive even integer, got {self.n}")
        if self.l is not None and not self.l > 0:
            raise ConfigError(f"l must be positive, got {self.l}")
        if not 0 <= self.m <= 20:
            raise ConfigError(f"m must lie in [0, 20], got {self.m}")
        if not 0 < self.tol < 1:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol}")
        if self.maxit < 1:
            raise ConfigError("maxit must be positive")
        if self.nt < 1:
            raise ConfigError("nt must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.method not in ("iterated", "direct"):
            raise ConfigError(f"method must be 'iterated' or 'direct', got {self.method!r}")
        if self.q0 and not self.q0.startswith("builtin:") and not Path(self.q0).is_file():
            raise ConfigError(f"input field {self.q0!r} does not exist")
        return self

    def hashable(self) -> Dict[str, Any]:
        d = {}
        for f in dataclasses.fields(self):
            if f.name in self._UNHASHED:
                continue
            v = getattr(self, f.name)
            if f.name == "k":
                v = [[complex(z).real, complex(z).imag] for z in v]
            d[f.name] = v
        return d

    def hash(self) -> str:
        blob = json.dumps(self.hashable(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def parse_complex_list(text: str) -> List[complex]:
    """``"0.5+0.5j, 1"`` -> ``[0.5+0.5j, 1+0j]``; ``i`` is accepted for ``j``."""
    out = []
    for tok in text.replace(";", ",").split(","):
        tok = tok.strip().replace(" ", "")
        if not tok:
            continue
        try:
            out.append(complex(tok.replace("i", "j")))
        except ValueError as exc:
            raise ConfigError(f"cannot parse complex value {tok!r}") from exc
    return out


_CASTS = {
    "n": int,
    "l": float,
    "m": int,
    "tol": float,
    "maxit": int,
    "t": float,
    "nt": int,
    "workers": int,
    "seed": int,
    "sublattice": int,
    "stride": int,
    "dispersion": float,
}


def _coerce(key: str, raw: Any) -> Any:
    if key == "k":
        return parse_complex_list(raw) if isinstance(raw, str) else [complex(z) for z in raw]
    if key == "plot":
        return raw if isinstance(raw, bool) else str(raw).strip().lower() in ("1", "true", "yes", "on")
    cast = _CASTS.get(key)
    try:
        return cast(raw) if cast else raw
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path: os.PathLike | str) -> Dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values: Dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, val)
    return values


def build_config(experiment: str, file_values: Mapping[str, Any], overrides: Mapping[str, Any], defaults: Mapping[str, Any]) -> RunConfig:
    """Precedence: command line, then config file, then per-experiment defaults."""
    merged: Dict[str, Any] = {"workers": default_workers()}
    merged.update(defaults)
    merged.update(file_values)
    merged.update({k: _coerce(k, v) for k, v in overrides.items() if v is not None})
    merged["experiment"] = experiment
    return RunConfig(**merged).validate()


def write_csv(path: os.PathLike | str, columns: Sequence[str], rows: Iterable[Sequence[Any]], cfg: RunConfig) -> Path:
    """CSV with a provenance comment line carrying the config hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.hash()} experiment={cfg.experiment}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


__all__ = [
    "ConfigError",
    "RunConfig",
    "WORKERS_ENV",
    "build_config",
    "parse_complex_list",
    "read_config_file",
    "write_csv",
]
