"""Experiment configuration: a sectioned key-value document (INI) or its JSON twin.

Schema (section.key: type, default)::

    [scenario]   preset: str            (optional; base values for the keys below)
                 regression: str, noise_level: str, noise: str, A1: float, A2: float
    [dictionary] kind: histogram|fourier (required), size: int (required)
    [plan]       n, M, R, seed: int (required)
                 t: float list = 1, 2, 3
                 s_points: int = 200, s_min_ratio: float = 1e-4
                 tail_s: float list = 0.03, 0.3, 1   (fractions of s_box)
                 margin_samples: int = 10000
                 scaling_n: int list = 1024, 4096, 16384
                 scaling_D: int list = 8, 16, 32
                 band: float list = 0.5, 2
                 ratio: float = 3
    [bounds]     c0: float = 1
    [output]     directory: str = out, formats: str list = json, csv

Unknown sections or keys are rejected. Missing required keys are reported as
``section.key``. :func:`dumps` writes every resolved value, so
``loads(dumps(cfg)) == cfg``.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dictionary import make_dictionary
from .harness import ExperimentPlan, PlanError
from .scenario import PRESETS, Scenario, ScenarioError, preset


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


def _int(v):
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return int(str(v).strip())


def _float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    return float(v) if isinstance(v, (int, float)) else float(str(v).strip())


def _str(v):
    if not isinstance(v, str):
        raise ValueError("expected a string")
    return v.strip()


def _list(conv):
    def parse(v):
        items = v if isinstance(v, (list, tuple)) else [p for p in str(v).split(",") if p.strip()]
        return tuple(conv(p) for p in items)
    return parse


REQUIRED = object()

SCHEMA = {
    "scenario": {"preset": (_str, None), "regression": (_str, None), "noise_level": (_str, None),
                 "noise": (_str, None), "A1": (_float, None), "A2": (_float, None)},
    "dictionary": {"kind": (_str, REQUIRED), "size": (_int, REQUIRED)},
    "plan": {
        "n": (_int, REQUIRED), "M": (_int, REQUIRED), "R": (_int, REQUIRED), "seed": (_int, REQUIRED),
        "t": (_list(_float), (1.0, 2.0, 3.0)), "s_points": (_int, 200), "s_min_ratio": (_float, 1e-4),
        "tail_s": (_list(_float), (0.03, 0.3, 1.0)), "margin_samples": (_int, 10_000),
        "scaling_n": (_list(_int), (1024, 4096, 16384)), "scaling_D": (_list(_int), (8, 16, 32)),
        "band": (_list(_float), (0.5, 2.0)), "ratio": (_float, 3.0),
    },
    "bounds": {"c0": (_float, 1.0)},
    "output": {"directory": (_str, "out"), "formats": (_list(_str), ("json", "csv"))},
}
FORMATS = ("json", "csv")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; ``sections`` maps section -> key -> typed value."""

    sections: dict = field(default_factory=dict)

    def get(self, path: str):
        section, key = path.split(".")
        return self.sections[section][key]

    def with_value(self, path: str, value) -> "ExperimentConfig":
        section, key = path.split(".")
        raw = {s: dict(v) for s, v in self.sections.items()}
        raw[section][key] = value
        return resolve(raw)

    def scenario(self) -> Scenario:
        sc = self.sections["scenario"]
        try:
            return Scenario(regression=sc["regression"], noise_level=sc["noise_level"], noise=sc["noise"],
                            A1=sc["A1"], A2=sc["A2"], name=sc["preset"] or "custom")
        except ScenarioError as exc:
            raise ConfigError(f"scenario: {exc}") from None

    def plan(self, threads: int | None = None) -> ExperimentPlan:
        d, p = self.sections["dictionary"], self.sections["plan"]
        try:
            dictionary = make_dictionary(d["kind"], d["size"])
        except ValueError as exc:
            raise ConfigError(f"dictionary: {exc}") from None
        try:
            return ExperimentPlan(
                self.scenario(), dictionary, n=p["n"], M=p["M"], R=p["R"], seed=p["seed"], t_grid=p["t"],
                s_points=p["s_points"], s_min_ratio=p["s_min_ratio"], c0=self.sections["bounds"]["c0"],
                ratio=p["ratio"], tail_s=p["tail_s"], margin_samples=p["margin_samples"],
                scaling_n=p["scaling_n"], scaling_D=p["scaling_D"], band=p["band"], threads=threads)
        except PlanError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in keys.items()}
                for s, keys in self.sections.items()}


def resolve(raw: dict) -> ExperimentConfig:
    """Validate a nested ``{section: {key: value}}`` mapping and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of sections")
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(f"{section}: unknown section (expected one of {', '.join(SCHEMA)})")
    out = {}
    for section, keys in SCHEMA.items():
        given = raw.get(section, {}) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"{section}: expected a table of keys")
        for key in given:
            if key not in keys:
                raise ConfigError(f"{section}.{key}: unknown key")
        values = {}
        for key, (conv, default) in keys.items():
            path = f"{section}.{key}"
            if key in given and given[key] is not None:
                try:
                    values[key] = conv(given[key])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}: invalid value {given[key]!r} ({exc})") from None
            elif default is REQUIRED:
                raise ConfigError(f"{path}: missing required key")
            else:
                values[key] = default
        out[section] = values
    _resolve_scenario(out["scenario"])
    bad = [f for f in out["output"]["formats"] if f not in FORMATS]
    if bad:
        raise ConfigError(f"output.formats: unknown format {bad[0]!r} (expected json and/or csv)")
    cfg = ExperimentConfig(out)
    cfg.plan()  # surfaces plan-level errors with their key path
    return cfg


def _resolve_scenario(sc: dict):
    base = sc["preset"]
    if base is not None:
        if base not in PRESETS:
            raise ConfigError(f"scenario.preset: unknown preset {base!r} (expected one of {', '.join(PRESETS)})")
        spec = preset(base).to_spec()
    else:
        for key in ("regression", "noise_level"):
            if sc[key] is None:
                raise ConfigError(f"scenario.{key}: missing required key (or set scenario.preset)")
        spec = {"noise": "rademacher", "A1": 1.0, "A2": 2.0}
    for key in ("regression", "noise_level", "noise", "A1", "A2"):
        if sc[key] is None:
            sc[key] = spec[key]


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, keys in cfg.sections.items():
        parser[section] = {k: _fmt(v) for k, v in keys.items() if v is not None}
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in parser[section].items()]
        lines.append("")
    return "\n".join(lines)


def loads(text: str, fmt: str = "ini") -> ExperimentConfig:
    if fmt == "json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse JSON configuration: {exc}") from None
        return resolve(raw)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    return resolve({s: dict(parser[s]) for s in parser.sections()})


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {str(path)!r}: {exc.strerror}") from None
    return loads(text, "json" if path.suffix.lower() == ".json" else "ini")
