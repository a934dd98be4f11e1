"""Sectioned key=value run configuration layered over the packaged defaults."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .grid import ModelParams, RadialGrid
from .scheme import SchemeConfig

OUTPUT_ROOT_ENV = "CHEMOLAYER_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


def load_defaults() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep "N" distinct from "n"
    text = resources.files("chemolayer").joinpath("data/defaults.ini").read_text("utf-8")
    cp.read_string(text)
    return cp


def load_config(path: str | Path | None = None) -> configparser.ConfigParser:
    cp = load_defaults()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return cp


def thresholds(cp: configparser.ConfigParser | None = None) -> dict[str, float]:
    cp = load_defaults() if cp is None else cp
    return {k: float(v) for k, v in cp["thresholds"].items()}


def defaults_version(cp: configparser.ConfigParser | None = None) -> int:
    cp = load_defaults() if cp is None else cp
    return cp.getint("meta", "version")


def parse_eps_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad eps_list {text!r}") from exc
    if not vals:
        raise ConfigError("eps_list is empty")
    return vals


def resolve_output(path: str | Path) -> Path:
    """Relative output paths live under $CHEMOLAYER_OUTPUT_ROOT when it is set."""
    path = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


@dataclass(frozen=True)
class RunConfig:
    grid: RadialGrid
    params: ModelParams
    scheme: SchemeConfig
    preset: str
    preset_kwargs: dict = field(default_factory=dict)
    output_dir: Path = Path("output")
    stride: int = 10
    eps_list: tuple[float, ...] = ()
    workers: int = 1
    monitor_stride: int = 1
    delta_exponent: float = 0.4

    def with_params(self, **changes) -> "RunConfig":
        return replace(self, params=replace(self.params, **changes))


def build_run_config(cp: configparser.ConfigParser, overrides: dict | None = None) -> RunConfig:
    """Validate the parsed sections and build typed objects; ``overrides`` use section.key names."""
    overrides = overrides or {}
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key] = str(value)
    try:
        d, m, t, i, s, o, e = (cp[x] for x in ("domain", "model", "time", "init", "scheme", "output", "experiment"))
        grid = RadialGrid(d.getfloat("a"), d.getfloat("b"), d.getint("n"), d.getint("N"))
        params = ModelParams(
            m.getfloat("eps"), m.getfloat("kappa"), m.getfloat("lambda"), t.getfloat("dt"), t.getfloat("T")
        )
        scheme = SchemeConfig(
            theta=s.getfloat("theta"),
            cfl_advect=t.getfloat("cfl"),
            max_picard=s.getint("max_picard"),
            tol_picard=s.getfloat("tol_picard"),
            tol_mass=s.getfloat("tol_mass"),
            tol_max=s.getfloat("tol_max"),
            adaptive_dt=t.getboolean("adaptive"),
        )
        preset_kwargs = {
            "amp": i.getfloat("amp"),
            "bump": i.getfloat("bump"),
            "deficit": i.getfloat("deficit"),
        }
        return RunConfig(
            grid=grid,
            params=params,
            scheme=scheme,
            preset=i.get("preset"),
            preset_kwargs=preset_kwargs,
            output_dir=resolve_output(o.get("dir")),
            stride=o.getint("stride"),
            eps_list=parse_eps_list(e.get("eps_list")),
            workers=e.getint("workers"),
            monitor_stride=e.getint("monitor_stride"),
            delta_exponent=e.getfloat("delta_exponent"),
        )
    except (KeyError, ValueError, configparser.Error) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc
