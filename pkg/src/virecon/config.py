"""``key=value`` experiment configuration files."""

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from virecon.benchmarks import BENCHMARKS
from virecon.errors import ParseError


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    k: int = 1
    n: int = 4
    levels: int = 3
    tau_rule: str = "h2"
    tau: Optional[float] = None
    T: float = 0.5
    sigma_mode: str = "lumped"
    residual: str = "corrected"
    coupling: str = "energy"
    verification: bool = False
    fine_depth: int = 2
    refinement: str = "uniform"
    theta: float = 0.5
    budget: int = 20000
    record_time: bool = False
    output_dir: str = "out"


_CHOICES = {
    "problem": tuple(BENCHMARKS),
    "tau_rule": ("h2", "fixed"),
    "sigma_mode": ("lumped", "consistent"),
    "residual": ("corrected", "printed"),
    "coupling": ("eta0", "energy"),
    "refinement": ("uniform", "adaptive"),
}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, raw, kind):
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        value = float(raw)
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("must be finite")
        return value
    return raw


_KINDS = {
    "problem": str, "k": int, "n": int, "levels": int, "tau_rule": str,
    "tau": float, "T": float, "sigma_mode": str, "residual": str,
    "coupling": str, "verification": bool, "fine_depth": int,
    "refinement": str, "theta": float, "budget": int, "record_time": bool,
    "output_dir": str,
}
assert set(_KINDS) == {f.name for f in fields(ExperimentConfig)}


def _check_range(key, value):
    if key in _CHOICES and value not in _CHOICES[key]:
        return f"{key} must be one of {list(_CHOICES[key])}"
    if key == "k" and value not in (1, 2):
        return "k must be 1 or 2"
    if key in ("n", "levels", "fine_depth", "budget") and value < 1:
        return f"{key} must be >= 1"
    if key == "theta" and not 0.0 < value <= 1.0:
        return "theta must lie in (0, 1]"
    if key in ("tau", "T") and not value > 0.0:
        return f"{key} must be positive"
    return None


def load_config(text):
    """Parse configuration text; raises ``ParseError`` with the offending line."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KINDS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            value = _convert(key, raw, _KINDS[key])
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
        problem = _check_range(key, value)
        if problem:
            raise ParseError(problem, lineno)
        values[key] = value
    if "problem" not in values:
        raise ParseError("missing problem")
    if values.get("tau_rule") == "fixed" and "tau" not in values:
        raise ParseError("tau_rule=fixed needs a tau value")
    return ExperimentConfig(**values)


def load_config_file(path):
    return load_config(Path(path).read_text())
