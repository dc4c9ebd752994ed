"""Run configuration files (TOML).

Every section is optional except ``[arch]`` with ``n_inputs`` and
``fan_ins``; unknown sections or keys are rejected with their key path.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .circuit import ArchitectureSpec, ConfigurationError
from .evolution import DEFAULT_RANGE, GeneticConfig, RefineConfig, SelectionConfig
from .harness import FAULT_KINDS, TestProtocol
from .imaging import TEST_DIST, TRAIN_DIST, DeformationDistribution


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    arch: ArchitectureSpec
    seed: int = 0
    value_range: tuple[float, float] = DEFAULT_RANGE
    glyphs: str = "builtin"
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    genetic: GeneticConfig = field(default_factory=GeneticConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    test: TestProtocol = field(default_factory=TestProtocol)
    fault_kind: str = "open"


_DIST_KEYS = ("sigma_noise", "sigma_rot", "sigma_scale", "sigma_shift", "mode", "composed", "order")


def _take(section: dict, prefix: str, allowed, required=()) -> dict:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{prefix}.{unknown[0]}", "unknown key")
    for key in required:
        if key not in section:
            raise ConfigError(f"{prefix}.{key}", "required key missing")
    return dict(section)


def _build(prefix: str, factory, kwargs: dict):
    try:
        return factory(**kwargs)
    except (TypeError, ValueError, ConfigurationError) as exc:
        raise ConfigError(prefix, str(exc)) from None


def _fields(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls)]


def _dist(raw: dict, prefix: str, base: DeformationDistribution) -> DeformationDistribution:
    kw = _take(raw, prefix, _DIST_KEYS)
    if "order" in kw:
        kw["order"] = tuple(kw["order"])
    return _build(prefix, lambda **k: dataclasses.replace(base, **k), kw) if kw else base


def from_dict(data: dict) -> RunConfig:
    top = _take(data, "config", ("seed", "arch", "resistance", "glyphs", "selection", "genetic",
                                 "refine", "train_dist", "test", "faults"), required=("arch",))
    for key, value in top.items():
        if key != "seed" and not isinstance(value, dict):
            raise ConfigError(key, "expected a table")

    arch_kw = _take(top["arch"], "arch", ("n_inputs", "fan_ins", "logic_high", "threshold"),
                    required=("n_inputs", "fan_ins"))
    arch_kw["fan_ins"] = tuple(arch_kw["fan_ins"])
    arch = _build("arch", ArchitectureSpec, arch_kw)

    res = _take(top.get("resistance", {}), "resistance", ("min", "max"))
    value_range = (float(res.get("min", DEFAULT_RANGE[0])), float(res.get("max", DEFAULT_RANGE[1])))
    if not 0 < value_range[0] < value_range[1]:
        raise ConfigError("resistance", f"need 0 < min < max, got {value_range}")

    glyphs = _take(top.get("glyphs", {}), "glyphs", ("source",)).get("source", "builtin")
    selection = _build("selection", SelectionConfig,
                       _take(top.get("selection", {}), "selection", _fields(SelectionConfig)))
    genetic = _build("genetic", GeneticConfig,
                     _take(top.get("genetic", {}), "genetic", _fields(GeneticConfig)))

    refine_kw = _take(top.get("refine", {}), "refine", [k for k in _fields(RefineConfig) if k != "train_dist"])
    refine_kw["train_dist"] = _dist(top.get("train_dist", {}), "train_dist", TRAIN_DIST)
    refine = _build("refine", RefineConfig, refine_kw)

    test_raw = dict(top.get("test", {}))
    n_sets = test_raw.pop("n_sets", 10_000)
    test = _build("test", TestProtocol, {"dist": _dist(test_raw, "test", TEST_DIST), "n_sets": n_sets})

    fault_kind = _take(top.get("faults", {}), "faults", ("kind",)).get("kind", "open")
    if fault_kind not in FAULT_KINDS:
        raise ConfigError("faults.kind", f"must be one of {FAULT_KINDS}")

    seed = top.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    return RunConfig(arch, seed, value_range, str(glyphs), selection, genetic, refine, test, fault_kind)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    cfg = from_dict(data)
    if cfg.glyphs != "builtin" and not Path(cfg.glyphs).is_absolute():
        cfg.glyphs = str(Path(path).resolve().parent / cfg.glyphs)
    return cfg
