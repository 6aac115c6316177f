"""Run configuration: one flat key-value record per experiment, read from YAML."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from ..domain import VARIANTS

EXPERIMENTS = ("solve", "l2", "lq", "interface", "oscillation", "caccioppoli",
               "pressure-osc", "divergence", "sharp-maximal")
Q_RANGE = (1.2, 16.0)
KAPPA_MIN = 16

_TUPLES = ("domains", "rhos", "jumps", "q", "grids", "kappas", "viscosities", "breakpoints")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything a sweep needs; a fixed seed makes every run deterministic.

    Lengths are in units of the box side ``L``; ``r``/``R`` are ball radii,
    ``x0`` the ball center (defaults to the box center).  ``ell`` is the
    constant divergence imposed inside local windows.
    """

    experiment: str = "l2"
    d: int = 2
    domains: tuple = ("periodic_box", "half_strip")
    n: int = 128
    L: float = 1.0
    H: Optional[float] = None
    rhos: tuple = (0.05,)
    delta: float = 0.25
    low: float = 0.3
    high: float = 3.0
    jumps: tuple = (1, 2, 4, 8, 16, 32, 64)
    amplitude: float = 0.0
    q: tuple = (2.0,)
    grids: tuple = ()
    kappas: tuple = (16, 32, 64)
    r: float = 0.125
    R: float = 0.25
    x0: Optional[tuple] = None
    ell: float = 0.0
    viscosities: tuple = (1.0, 10.0)
    breakpoints: tuple = (0.5,)
    sigma: float = 1.0
    ensemble: int = 20
    tol: float = 1e-10
    seed: int = 0
    out: str = "results"
    cap: Optional[float] = None

    def __post_init__(self):
        for name in _TUPLES:
            val = getattr(self, name)
            if val is not None and not isinstance(val, tuple):
                val = tuple(val) if isinstance(val, (list, tuple)) else (val,)
                object.__setattr__(self, name, val)
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.d not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        for v in self.domains:
            if v not in VARIANTS:
                raise ConfigError(f"unknown domain variant {v!r}")
        for q in self.q:
            if not Q_RANGE[0] <= q <= Q_RANGE[1]:
                raise ConfigError(f"q = {q} outside [{Q_RANGE[0]}, {Q_RANGE[1]}]")
        for k in self.kappas:
            if k < KAPPA_MIN:
                raise ConfigError(f"kappa = {k} below {KAPPA_MIN}")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not self.delta <= self.low <= 1 / self.delta or not self.delta <= self.high <= 1 / self.delta:
            raise ConfigError("layer viscosities must lie in [delta, 1/delta]")
        if any(int(j) != j or j < 0 for j in self.jumps):
            raise ConfigError("jump counts must be non-negative integers")
        if not 1e-14 <= self.tol <= 1e-6:
            raise ConfigError("tol must lie in [1e-14, 1e-6]")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.n < 4 or any(g < 4 for g in self.grids):
            raise ConfigError("grids need at least 4 cells per axis")
        if not 0 < self.r < self.R:
            raise ConfigError("need 0 < r < R")
        if self.ensemble < 1:
            raise ConfigError("ensemble size must be positive")
        if any(v <= 0 for v in self.viscosities):
            raise ConfigError("viscosities must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def digest(self) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


# Defaults per experiment, matching the verification suites.
DEFAULTS = {
    "solve": dict(domains=("periodic_box",), n=64, jumps=(8,)),
    "l2": dict(domains=("periodic_box", "half_strip"), n=128,
               jumps=(1, 2, 4, 8, 16, 32, 64), q=(2.0,), cap=2.0),
    "lq": dict(domains=("periodic_box", "half_strip"), n=128,
               jumps=(1, 2, 4, 8, 16, 32, 64), q=(4.0, 8.0, 4.0 / 3.0), cap=3.0),
    "interface": dict(domains=("half_strip",), grids=(64, 128, 256), viscosities=(1.0, 10.0),
                      breakpoints=(0.5,), sigma=1.0, delta=0.1, low=1.0, high=10.0),
    "oscillation": dict(domains=("periodic_box",), n=256, jumps=(8,), kappas=(16, 32, 64),
                        R=0.25, r=0.25 / 64, cap=-0.4),
    "caccioppoli": dict(domains=("periodic_box",), n=128, ensemble=20, R=0.25, r=0.125,
                        cap=4.0),
    "pressure-osc": dict(domains=("periodic_box",), n=128, ensemble=20, R=0.25, r=0.125,
                         cap=4.0),
    "divergence": dict(domains=("dirichlet_box", "half_strip", "lipschitz_graph"),
                       grids=(32, 64, 128), rhos=(0.0, 0.05), cap=0.10),
    "sharp-maximal": dict(domains=("periodic_box", "lipschitz_graph"), grids=(32, 64),
                          q=(2.0, 4.0), ensemble=1000, rhos=(0.05,), cap=2.0),
}


def default_config(experiment: str, **overrides) -> RunConfig:
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values = dict(DEFAULTS[experiment])
    values.update(overrides)
    return RunConfig(experiment=experiment, **values)


def load_config(path, experiment: Optional[str] = None) -> RunConfig:
    """Read a YAML mapping; keys not named in ``RunConfig`` are rejected.

    The experiment named in the file (or ``experiment``) selects the
    defaults that the file's keys override.
    """
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a key-value mapping")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    name = experiment or data.pop("experiment", None) or "l2"
    data.pop("experiment", None)
    return default_config(name, **data)
