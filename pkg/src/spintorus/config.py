"""Run configuration: flat key-value text with sections, or JSON."""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .lattice import Lattice, SpinStructure, make_lattice
from .solver import ContinuationSchedule


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (names the offending field)."""


@dataclass
class RunConfig:
    v1: tuple[float, float] = (1.0, 0.0)
    v2: tuple[float, float] = (0.0, 1.0)
    eps1: int = 1
    eps2: int = -1
    n_grid: int = 32
    p_values: tuple = (2.0, 2.5, 3.0, 3.5, 3.8, 3.95, 4.0)
    q_values: tuple = (1.4, 1.5, 1.6, 1.8, 2.0)
    tol_grad: float | None = None
    tol_solve: float | None = None
    tol_norm: float = 1e-10
    tol_closed: float = 1e-5
    tol_cmc: float = 0.01
    zero_tol: float = 1e-6
    seed: int = 0
    copies: tuple[int, int] = (1, 1)
    out_dir: str = "."

    def validate(self) -> "RunConfig":
        try:
            make_lattice(self.v1, self.v2)
        except ValueError as exc:
            raise ConfigError(f"lattice: {exc}") from exc
        if self.eps1 not in (-1, 1):
            raise ConfigError(f"eps1: must be +1 or -1, got {self.eps1}")
        if self.eps2 not in (-1, 1):
            raise ConfigError(f"eps2: must be +1 or -1, got {self.eps2}")
        n = self.n_grid
        if n % 2 != 0 or not 4 <= n <= 512:
            raise ConfigError(f"n_grid: must be even and in [4, 512], got {n}")
        for name in ("tol_norm", "tol_closed", "tol_cmc", "zero_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        for name in ("tol_grad", "tol_solve"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ConfigError(f"{name}: must be positive")
        k1, k2 = self.copies
        if k1 < 1 or k2 < 1:
            raise ConfigError(f"copies: tiling counts must be >= 1, got {self.copies}")
        try:
            ContinuationSchedule(p_values=tuple(self.p_values))
        except ValueError as exc:
            raise ConfigError(f"p_values: {exc}") from exc
        for q in self.q_values:
            if not 4.0 / 3.0 < q <= 2.0:
                raise ConfigError(f"q_values: q={q} outside (4/3, 2]")
        return self

    def lattice(self) -> Lattice:
        return make_lattice(self.v1, self.v2)

    def spin(self) -> SpinStructure:
        return SpinStructure(self.eps1, self.eps2)

    def schedule(self) -> ContinuationSchedule:
        return ContinuationSchedule(
            p_values=tuple(self.p_values),
            tol_solve=self.tol_solve,
            tol_norm=self.tol_norm,
        )

    def as_dict(self) -> dict:
        data = asdict(self)
        data["v1"] = list(self.v1)
        data["v2"] = list(self.v2)
        data["p_values"] = list(self.p_values)
        data["q_values"] = list(self.q_values)
        data["copies"] = list(self.copies)
        return data


def _parse_pair(text: str, name: str) -> tuple[float, float]:
    toks = text.replace(",", " ").split()
    if len(toks) != 2:
        raise ConfigError(f"{name}: expected two numbers, got {text!r}")
    return (float(toks[0]), float(toks[1]))


def _parse_floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def load_config(path) -> RunConfig:
    """Read a config file (INI-style sections or a JSON object)."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        return config_from_dict(data)
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    cfg = RunConfig()
    sec = parser["lattice"] if parser.has_section("lattice") else {}
    if "v1" in sec:
        cfg.v1 = _parse_pair(sec["v1"], "v1")
    if "v2" in sec:
        cfg.v2 = _parse_pair(sec["v2"], "v2")
    sec = parser["spin"] if parser.has_section("spin") else {}
    if "eps1" in sec:
        cfg.eps1 = int(sec["eps1"])
    if "eps2" in sec:
        cfg.eps2 = int(sec["eps2"])
    sec = parser["run"] if parser.has_section("run") else {}
    if "n_grid" in sec:
        cfg.n_grid = int(sec["n_grid"])
    if "seed" in sec:
        cfg.seed = int(sec["seed"])
    if "p_values" in sec:
        cfg.p_values = _parse_floats(sec["p_values"])
    if "q_values" in sec:
        cfg.q_values = _parse_floats(sec["q_values"])
    if "copies" in sec:
        pair = _parse_pair(sec["copies"], "copies")
        cfg.copies = (int(pair[0]), int(pair[1]))
    if "out_dir" in sec:
        cfg.out_dir = sec["out_dir"]
    sec = parser["tolerances"] if parser.has_section("tolerances") else {}
    for name in ("tol_grad", "tol_solve", "tol_norm", "tol_closed", "tol_cmc", "zero_tol"):
        if name in sec:
            setattr(cfg, name, float(sec[name]))
    return cfg.validate()


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in data.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"{key}: unknown configuration field")
        if key in ("v1", "v2"):
            value = (float(value[0]), float(value[1]))
        elif key in ("p_values", "q_values"):
            value = tuple(float(v) for v in value)
        elif key == "copies":
            value = (int(value[0]), int(value[1]))
        elif key in ("eps1", "eps2", "n_grid", "seed"):
            value = int(value)
        elif key == "out_dir":
            value = str(value)
        elif value is not None:
            value = float(value)
        setattr(cfg, key, value)
    return cfg.validate()
