"""Run configuration, input digests and deterministic JSON reports.

Reports are byte-identical across identical invocations except for the
``generated_at`` line, which is the only place a timestamp appears.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .fieldio import encode_field
from .morrey import MorreyParams

TOLERANCE_NAMES = (
    "energy",
    "local",
    "residual",
    "identity",
    "liouville",
    "riesz",
    "riesz_identity",
    "poisson",
    "inequality",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run, validated before any computation."""

    subcommand: str
    target: str | None = None
    n: int | None = None
    box: float | None = None
    gamma: str | None = None
    p: str | None = None
    radii: tuple | None = None
    ladder: str | None = None
    dt: float | None = None
    T: float | None = None
    out: str = "."
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n is not None and (int(self.n) != self.n or self.n < 16):
            raise ConfigurationError(f"--n must be an integer >= 16, got {self.n!r}")
        for name in ("box", "dt", "T"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"--{name} must be positive, got {v!r}")
        if self.radii is not None:
            if not self.radii or any(not (math.isfinite(r) and r > 0) for r in self.radii):
                raise ConfigurationError(f"--radii must be positive numbers, got {self.radii!r}")
        if self.ladder is not None:
            ladder_base(self.ladder)
        for k, v in self.tolerances.items():
            if k not in TOLERANCE_NAMES:
                raise ConfigurationError(f"unknown tolerance --tol.{k}; known: {', '.join(TOLERANCE_NAMES)}")
            if not (math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"--tol.{k} must be a non-negative number")

    def morrey_params(self, gamma=1.0, p=3.0) -> MorreyParams:
        """Morrey parameters from single-valued ``--gamma``/``--p`` flags."""
        g = _scalar(self.gamma, "gamma", gamma)
        q = _scalar(self.p, "p", p)
        try:
            return MorreyParams(q, g)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None

    def tol(self, name, default):
        return float(self.tolerances.get(name, default))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["radii"] = None if self.radii is None else [float(r) for r in self.radii]
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        d["options"] = dict(sorted(self.options.items()))
        return d


def _scalar(text, name, default):
    if text is None:
        return float(default)
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"--{name} expects a number here, got {text!r}") from None


def ladder_base(spec: str) -> float:
    """Parse ``geometric:BASE`` into the ladder base."""
    kind, _, base = spec.partition(":")
    if kind != "geometric":
        raise ConfigurationError(f"unsupported ladder {spec!r}; use geometric:BASE")
    try:
        b = float(base) if base else 2.0**0.5
    except ValueError:
        raise ConfigurationError(f"bad ladder base in {spec!r}") from None
    if not b > 1.0:
        raise ConfigurationError("ladder base must exceed 1")
    return b


def digest(*chunks) -> str:
    """SHA-256 over byte strings, fields, arrays or text, in order."""
    h = hashlib.sha256()
    for c in chunks:
        if isinstance(c, (bytes, bytearray)):
            h.update(c)
        elif isinstance(c, str):
            h.update(c.encode())
        elif isinstance(c, np.ndarray):
            h.update(np.ascontiguousarray(c, dtype=np.float64).tobytes())
        elif hasattr(c, "grid") and hasattr(c, "data"):
            h.update(encode_field(c))
        else:
            h.update(json.dumps(to_jsonable(c), sort_keys=True).encode())
    return h.hexdigest()


def file_digest(path) -> str:
    return digest(Path(path).read_bytes())


def to_jsonable(obj):
    """Convert dataclasses, numpy values and non-finite floats to JSON-safe data."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if hasattr(v, "grid") and hasattr(v, "data"):
                continue  # sampled fields stay out of reports
            out[f.name] = to_jsonable(v)
        for name in ("holds",):
            if hasattr(type(obj), name):
                out[name] = to_jsonable(getattr(obj, name))
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim > 1 and obj.size > 64:
            return None
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def write_report(path, config: RunConfig, input_digest: str, body: dict, holds: bool, now=None) -> Path:
    """Write a JSON report whose only time-dependent line is ``generated_at``."""
    stamp = (now or _dt.datetime.now(_dt.timezone.utc)).isoformat(timespec="seconds")
    doc = {
        "generated_at": stamp,
        "config": config.to_dict(),
        "input_digest": input_digest,
        "holds": bool(holds),
        "result": to_jsonable(body),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")
    return path


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
