"""Experiment configuration and its ``key = value`` text form.

Every field of every section is written on its own line as
``section.field = value`` (nested sections add further dots, for example
``env.nav.accel``). Strings are bare, ``none`` stands for a missing value,
booleans are ``true``/``false`` and tuples use Python literal syntax.
"""
from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass, field, fields, is_dataclass, replace

from ..envs.distribution import TaskDistribution
from ..meta.state import OuterConfig
from ..safe_rl.config import InnerLoopConfig


class ConfigError(ValueError):
    """A config problem, reported with the dotted path of the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class FineTuneConfig:
    steps: int = 30
    tasks: int = 20
    algorithm: str = "trpo_lag"

    def __post_init__(self):
        if self.steps < 0 or self.tasks < 1:
            raise ValueError("need steps >= 0 and tasks >= 1")
        if self.algorithm not in ("trpo_lag", "cpo", "trpo"):
            raise ValueError("fine-tuning algorithm must be trpo_lag, cpo or trpo")


@dataclass(frozen=True)
class ExperimentSettings:
    """Run-level settings.

    ``record_wall_clock`` off writes ``0.0`` into the metrics' ``wall_clock_s``
    column so that reruns stay byte-identical; measured timings always go to
    ``timings.txt``.
    """

    name: str = "cmaml"
    seeds: tuple = (0,)
    output_dir: str = "runs"
    workers: int = 1
    record_wall_clock: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    env: TaskDistribution = field(default_factory=TaskDistribution)
    inner: InnerLoopConfig = field(default_factory=InnerLoopConfig)
    outer: OuterConfig = field(default_factory=OuterConfig)
    finetune: FineTuneConfig = field(default_factory=FineTuneConfig)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in flatten(self))

    @classmethod
    def from_text(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Parse ``text`` on top of ``base`` (defaults when ``None``)."""
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs.append((key, value))
        return apply_overrides(base or cls(), pairs)

    @classmethod
    def load(cls, path, base=None):
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read(), base)

    def content_hash(self) -> str:
        return git_blob_sha1(self.to_text().encode("utf-8"))


def git_blob_sha1(data: bytes) -> str:
    """Content hash the way ``git hash-object`` computes it for a blob."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return repr(value)
    return str(value)


def flatten(obj, prefix=""):
    """``(dotted_key, formatted_value)`` for every leaf field, in declaration order."""
    out = []
    for f in fields(obj):
        value = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if is_dataclass(value):
            out += flatten(value, key + ".")
        else:
            out.append((key, _format(value)))
    return out


def keys() -> list:
    return [k for k, _ in flatten(ExperimentConfig())]


def _parse(path, text, annotation, current):
    ann = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", str(annotation))
    optional = "None" in ann
    if optional and text.lower() == "none":
        return None
    base = ann.replace("| None", "").replace("None |", "").strip()
    if base == "bool" or isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(path, f"expected true/false, got {text!r}")
    try:
        if base == "int" or (isinstance(current, int) and base not in ("float", "tuple")):
            return int(text)
        if base == "float" or isinstance(current, float):
            return float(text)
        if base == "tuple" or isinstance(current, tuple):
            val = ast.literal_eval(text)
            if isinstance(val, (int, float)):
                val = (val,)
            if not isinstance(val, (tuple, list)):
                raise ValueError
            return tuple(val)
    except (ValueError, SyntaxError):
        raise ConfigError(path, f"cannot parse {text!r} as {base}") from None
    return text


def apply_overrides(cfg, pairs):
    """Set dotted ``(key, text)`` pairs on a config tree, validating every section."""
    updates = {}
    for key, text in pairs:
        updates[key] = text
    return _apply(cfg, updates, "")


def _apply(obj, updates, prefix):
    mine = {f.name: f for f in fields(obj)}
    changes = {}
    for name, f in mine.items():
        key = prefix + name
        value = getattr(obj, name)
        if is_dataclass(value):
            sub = {k: v for k, v in updates.items() if k.startswith(key + ".")}
            if sub:
                changes[name] = _apply(value, sub, key + ".")
        elif key in updates:
            changes[name] = _parse(key, updates[key], f.type, value)
    known = {prefix + n for n in mine}
    for k in updates:
        head = k[len(prefix):].split(".")[0]
        if prefix + head not in known:
            raise ConfigError(k, "unknown config key")
    if not changes:
        return obj
    try:
        return replace(obj, **changes)
    except (ValueError, TypeError) as exc:
        path = prefix.rstrip(".") or "config"
        bad = next(iter(changes))
        raise ConfigError(f"{prefix}{bad}" if len(changes) == 1 else path, str(exc)) from None


__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentSettings", "FineTuneConfig", "apply_overrides",
    "flatten", "git_blob_sha1", "keys",
]
