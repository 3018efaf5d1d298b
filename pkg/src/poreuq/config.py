"""Run configuration: a TOML file of dotted keys over built-in defaults.

Example::

    model = "p1"
    preset = "narrow"
    seed = 7

    [solver]
    resolution = 64

    [gsa]
    n_kde = 1000000

Every key is listed in :data:`DEFAULTS`; unknown keys are rejected. The
``scale`` key switches the sample-size defaults between the desk-scale
values and the full-size ones in :data:`FULL_SCALE`.
"""

from __future__ import annotations

import copy
import json
import sys

from .bayesnet import MODELS, PARAMS, PRESETS, HyperRanges

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["DEFAULTS", "FULL_SCALE", "RunConfig", "load_config"]

DEFAULTS = {
    "model": "p1",
    "preset": "narrow",
    "seed": 0,
    "jobs": 1,
    "out": "poreuq-run",
    "scale": "desk",
    "ranges.R": None,
    "ranges.theta": None,
    "ranges.d": None,
    "ranges.l": None,
    "solver.resolution": 64,
    "solver.tol": 1e-8,
    "solver.diffusivity_ratio": 1.0,
    "solver.bc": "mixed",
    "surrogate.orders": [4, 4, 4, 4],
    "surrogate.oversample": 2.0,
    "surrogate.n_train": None,
    "surrogate.design": "chebyshev",
    "sample.n": 100_000,
    "kde.grid_size": 128,
    "density.n_samples": 100_000,
    "gsa.n_kde": 1_000_000,
    "gsa.m_mc": 10_000,
    "gsa.marginal": "auto",
    "gsa.evaluation": "product",
    "gsa.design": "rqmc",
    "cramer.B": 1000,
    "cramer.confidence": 0.95,
    "cramer.n": 2000,
    "compare.enabled": True,
    "compare.model": "p1",
    "compare.preset": "physical",
    "cache.dir": None,
}

FULL_SCALE = {
    "solver.resolution": 128,
    "gsa.n_kde": 10_000_000,
    "gsa.m_mc": 100_000,
    "density.n_samples": 1_000_000,
}

_CHOICES = {
    "model": MODELS,
    "compare.model": MODELS,
    "preset": tuple(PRESETS) + ("custom",),
    "compare.preset": tuple(PRESETS),
    "scale": ("desk", "full"),
    "solver.bc": ("mixed", "periodic"),
    "surrogate.design": ("chebyshev", "uniform"),
    "gsa.marginal": ("auto", "uniform", "kde"),
    "gsa.evaluation": ("product", "joint"),
    "gsa.design": ("rqmc", "mc"),
}

_POSITIVE_INT = ("jobs", "solver.resolution", "sample.n", "kde.grid_size", "density.n_samples",
                 "gsa.n_kde", "gsa.m_mc", "cramer.B", "cramer.n")


def _flatten(table, prefix=""):
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


class RunConfig:
    """Validated mapping of dotted configuration keys."""

    def __init__(self, values: dict | None = None, **overrides):
        given = dict(values or {})
        given.update({k.replace("__", "."): v for k, v in overrides.items()})
        given = {k: v for k, v in given.items() if v is not None or k.startswith("ranges.")}
        unknown = sorted(set(given) - set(DEFAULTS))
        if unknown:
            raise ValueError(f"unknown configuration key(s): {', '.join(unknown)}")
        data = copy.deepcopy(DEFAULTS)
        if given.get("scale", data["scale"]) == "full":
            data.update(FULL_SCALE)
        data.update(given)
        self._data = data
        self._validate()

    def _validate(self):
        d = self._data
        for key, choices in _CHOICES.items():
            if d[key] not in choices:
                raise ValueError(f"{key} must be one of {choices}, got {d[key]!r}")
        for key in _POSITIVE_INT:
            if not (isinstance(d[key], int) and d[key] > 0):
                raise ValueError(f"{key} must be a positive integer, got {d[key]!r}")
        if not isinstance(d["seed"], int) or d["seed"] < 0:
            raise ValueError("seed must be a nonnegative integer")
        if not d["solver.tol"] > 0 or not d["solver.diffusivity_ratio"] > 0:
            raise ValueError("solver.tol and solver.diffusivity_ratio must be positive")
        if not 0 < d["cramer.confidence"] < 1:
            raise ValueError("cramer.confidence must lie in (0, 1)")
        if d["cramer.B"] < 200:
            raise ValueError("cramer.B must be at least 200")
        if d["surrogate.n_train"] is not None and not d["surrogate.n_train"] > 0:
            raise ValueError("surrogate.n_train must be positive")
        if len(d["surrogate.orders"]) != 4:
            raise ValueError("surrogate.orders needs one order per parameter")
        explicit = [d[f"ranges.{p}"] is not None for p in PARAMS]
        if any(explicit) and not all(explicit):
            raise ValueError("explicit ranges must give all four parameters")
        if d["preset"] == "custom" and not all(explicit):
            raise ValueError("preset 'custom' requires ranges.R/theta/d/l")
        self.ranges  # validates the bounds

    def __getitem__(self, key):
        return self._data[key]

    def get(self, key, default=None):
        return self._data.get(key, default)

    def as_dict(self) -> dict:
        return copy.deepcopy(self._data)

    def replace(self, **changes) -> "RunConfig":
        data = {k: v for k, v in self._data.items() if v is not None or k.startswith("ranges.")}
        data.update({k.replace("__", "."): v for k, v in changes.items()})
        return RunConfig(data)

    @property
    def ranges(self) -> HyperRanges:
        if self._data["ranges.R"] is not None:
            return HyperRanges.from_mapping({p: self._data[f"ranges.{p}"] for p in PARAMS})
        return PRESETS[self._data["preset"]]

    def to_json(self) -> str:
        return json.dumps(self._data, sort_keys=True, indent=2)


def load_config(path=None, **overrides) -> RunConfig:
    """Read a TOML config (optional) and apply keyword overrides."""
    values = {}
    if path is not None:
        with open(path, "rb") as fh:
            values = _flatten(tomllib.load(fh))
    values.update({k.replace("__", "."): v for k, v in overrides.items() if v is not None})
    return RunConfig(values)
