"""On-disk cache of forward solves keyed by a hash of the solve inputs."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

__all__ = ["SolveCache", "solve_key"]

_DIGITS = 12


def solve_key(params, resolution: int, tol: float, diffusivity_ratio: float = 1.0,
              bc: str = "mixed") -> str:
    """sha256 of the rounded parameters and solver settings.

    Inputs are rounded to 12 decimals so that values differing only in the
    last bits of a float (e.g. after a CSV round trip) share one entry.
    """
    values = [round(float(v), _DIGITS) for v in np.asarray(params, dtype=float).ravel()]
    payload = json.dumps({
        "params": [repr(v) for v in values],
        "resolution": int(resolution),
        "tol": repr(float(tol)),
        "diffusivity_ratio": repr(round(float(diffusivity_ratio), _DIGITS)),
        "bc": bc,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


class SolveCache:
    """Directory of ``<key>.json`` entries written atomically.

    ``hits`` and ``misses`` count lookups made through this instance.
    """

    def __init__(self, directory):
        self.directory = os.fspath(directory)
        os.makedirs(self.directory, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def path(self, key: str) -> str:
        return os.path.join(self.directory, key + ".json")

    def get(self, key: str):
        try:
            with open(self.path(key)) as fh:
                value = json.load(fh)
        except (FileNotFoundError, json.JSONDecodeError):
            self.misses += 1
            return None
        self.hits += 1
        return value

    def put(self, key: str, value: dict) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(value, fh, sort_keys=True)
            os.replace(tmp, self.path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __len__(self) -> int:
        return sum(1 for f in os.listdir(self.directory) if f.endswith(".json"))
