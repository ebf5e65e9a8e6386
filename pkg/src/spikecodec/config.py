"""Declarative run configuration.

A single TOML file with sections mirroring the module boundaries
(generator, baselines, training, evaluation) drives every CLI command;
command-line flags override file values.  Unknown sections or keys are
rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields, asdict
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .signals import GeneratorConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineSettings:
    tbr_delta: float = 0.005
    sf_threshold: float = 0.2
    mw_threshold: float = 0.06
    mw_window: int = 3
    tbr_delta_grid: tuple[float, ...] = ()
    sf_threshold_grid: tuple[float, ...] = ()
    mw_threshold_grid: tuple[float, ...] = ()
    mw_window_grid: tuple[int, ...] = ()

    def grid_for(self, method: str) -> dict | None:
        """Explicit grid from the config, or None for the published default."""
        if method == "tbr" and self.tbr_delta_grid:
            return {"delta": list(self.tbr_delta_grid)}
        if method == "sf" and self.sf_threshold_grid:
            return {"threshold": list(self.sf_threshold_grid)}
        if method == "mw" and (self.mw_threshold_grid or self.mw_window_grid):
            grid = {}
            if self.mw_threshold_grid:
                grid["threshold"] = list(self.mw_threshold_grid)
            if self.mw_window_grid:
                grid["window"] = list(self.mw_window_grid)
            return grid
        return None


@dataclass(frozen=True)
class EvalSettings:
    lambda_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.5, 1.0)
    lambda_seeds: int = 3
    snr_grid: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)
    snr_windows: int = 10000
    batch_size: int = 256


@dataclass
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    baselines: BaselineSettings = field(default_factory=BaselineSettings)
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvalSettings = field(default_factory=EvalSettings)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "baselines": asdict(self.baselines),
            "training": self.training.to_dict(),
            "evaluation": asdict(self.evaluation),
        }


_SECTION_TYPES = {
    "generator": GeneratorConfig,
    "baselines": BaselineSettings,
    "training": TrainConfig,
    "evaluation": EvalSettings,
}

# dataclass fields that must stay tuples after TOML's lists
_TUPLE_FIELDS = {
    "snr_db_set", "split", "snn_hidden", "lambda_grid", "snr_grid",
    "tbr_delta_grid", "sf_threshold_grid", "mw_threshold_grid", "mw_window_grid",
}


def _build_section(name: str, values: dict):
    cls = _SECTION_TYPES[name]
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    cleaned = {}
    for key, value in values.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        cleaned[key] = value
    try:
        return cls(**cleaned)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


def preset_path(name: str) -> Path:
    ref = resources.files("spikecodec").joinpath(f"presets/{name}.toml")
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    return Path(str(ref))


def load_run_config(path: str | Path | None = None, preset: str | None = None,
                    overrides: list[str] | None = None) -> RunConfig:
    """Merge (preset or file) -> override assignments into a RunConfig.

    Overrides are ``section.key=value`` strings; values are parsed as
    TOML literals so types match the file format.
    """
    if path is not None and preset is not None:
        raise ConfigError("pass either a config file or a preset, not both")
    raw: dict = {}
    if preset is not None:
        path = preset_path(preset)
    if path is not None:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    unknown_sections = set(raw) - set(_SECTION_TYPES)
    if unknown_sections:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown_sections))}")
    sections = {name: dict(raw.get(name, {})) for name in _SECTION_TYPES}

    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        target, literal = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section {section!r}")
        try:
            parsed = tomllib.loads(f"v = {literal}")["v"]
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse override value {literal!r}: {exc}") from exc
        sections[section][key] = parsed

    return RunConfig(**{name: _build_section(name, values)
                        for name, values in sections.items()})


def write_resolved_config(cfg: RunConfig, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.json"
    path.write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
    return path
