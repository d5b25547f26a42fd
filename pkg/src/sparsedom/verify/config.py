"""Experiment configuration: flat JSON documents with per-experiment defaults."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

EXPERIMENTS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8")

_BUMPS = [[0.0, 0.05], [1.3, 0.2], [-2.0, 0.5]]

# Every key an experiment understands, with its default.  Acceptance
# thresholds live here too so that a config can tighten or relax them.
DEFAULTS: dict[str, dict] = {
    "E1": {
        "n": 1, "N": 1024, "L": 4.0, "rho": 0.5,
        "noise": 4, "cutoff": 16.0, "bumps": _BUMPS,
        "stop_factor": math.sqrt(2.0),
        "refine": True, "stability_factor": 2.0,
    },
    "E2": {
        "n": 1, "N": 1024, "L": 4.0, "rho": 0.5,
        "p_values": [0.5, 1.0, 2.0, 3.0], "weight_exponents": [-0.5, 0.5, 1.5],
        "r": 2.0, "noise": 3, "cutoff": 16.0, "bumps": _BUMPS[:2],
        "families": 3, "max_level": 7,
        "refine": True, "stability_factor": 2.0,
    },
    "E3": {
        "n": 1, "rho": -1.0, "band": 2,
        "t_min": 4.0, "t_max": 64.0, "t_points": 9,
        "band_t": 16.0, "bands": [1, 2, 3, 4],
        "points_per_wave": 24, "w_samples": 1200,
        "slope_tol": 0.15, "band_tol": 0.2,
    },
    "E4": {
        "n": 1, "N": 8192, "L": 8.0, "rho": 0.5, "m": 0.0,
        "q": 2.0, "p": 2.0, "s": -0.25,
        "R_values": [8.0, 16.0, 32.0, 64.0], "excess": 0.25,
        "lhs_tol": 0.1, "norm_tol": 0.15, "flat_factor": 1.5,
    },
    "E5": {
        "N": 32768, "outer_depth": 8, "escape_depths": [3, 4, 5, 6, 7, 8],
        "r": 1.0, "factor": 0.6,
    },
    "E6": {
        "n": 1, "N": 1024, "L": 4.0, "symbol": "bessel", "m": -0.25, "rho": 0.5,
        "q": 3.0, "p": 3.0, "s": "inf", "kappa": 0.5, "sigma": 2.0,
        "weight_exponents": [-0.2, 0.0, 0.1],
        "noise": 3, "cutoff": 16.0, "bumps": [[0.0, 0.1], [1.3, 0.2], [-2.0, 0.5]],
        "refine": True, "stability_factor": 2.0,
        "prop_N": 4096, "prop_L": 256.0, "prop_rho": -1.0,
        "prop_q": 4.0 / 3.0, "prop_p": 4.0, "prop_r": 1.2,
        "prop_t_values": [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0],
        "prop_slope_tol": 0.1,
    },
    "E7": {
        "n": 1, "N": 512, "L": 4.0,
        "exponents": [[1.0, 2.0, 2.0, 4.0], [1.0, 2.0, 3.0, 6.0]],
        "weight_exponents": [-0.2, 0.0, 0.2, 0.4],
        "families": 6, "max_level": 7, "cutoff": 12.0,
        "refine": True, "stability_factor": 2.0,
    },
    "E8": {
        "n": 1, "N": 4096, "L": 64.0, "m": 0.0,
        "width": 0.5, "depth": 0.5, "max_gap": 5,
        "iterations": 500, "tol": 1e-12, "slope_max": -2.0,
    },
}

_COMMON = {"experiment", "seed", "threads"}


class ConfigError(ValueError):
    pass


def _as_float(v) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "threads": self.threads, **self.params}


def _check_type(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    elif isinstance(default, float):
        try:
            _as_float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    elif isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key}: expected a non-empty list, got {value!r}")
    elif isinstance(default, str):
        if not isinstance(value, (str, int, float)):
            raise ConfigError(f"{key}: expected a string, got {value!r}")


def _validate(exp: str, p: dict) -> None:
    """Exponent relations required by each experiment."""
    f = _as_float
    if "n" in p and p["n"] < 1:
        raise ConfigError("n must be >= 1")
    if "N" in p and (p["N"] < 8 or p["N"] & (p["N"] - 1)):
        raise ConfigError(f"N must be a power of two >= 8, got {p['N']}")
    if exp in ("E1", "E4") and not 0 < f(p["rho"]) < 1:
        raise ConfigError("rho must lie in (0, 1)")
    if exp == "E2":
        if any(f(x) <= 0 for x in p["p_values"]):
            raise ConfigError("p_values must be positive")
        if f(p["r"]) < 1:
            raise ConfigError("r must be >= 1")
    if exp == "E3":
        if not -1 <= f(p["rho"]) < 1:
            raise ConfigError("rho must lie in [-1, 1)")
        if not 0 < f(p["t_min"]) < f(p["t_max"]) or p["t_points"] < 3:
            raise ConfigError("need 0 < t_min < t_max and t_points >= 3")
        if len(p["bands"]) < 3 or min(p["bands"]) < 1:
            raise ConfigError("need at least three bands, all >= 1")
    if exp == "E4":
        if f(p["q"]) < 1 or f(p["p"]) <= 1:
            raise ConfigError("need q >= 1 and p > 1")
        if len(p["R_values"]) < 3:
            raise ConfigError("need at least three R values")
    if exp == "E5":
        if f(p["r"]) < 1:
            raise ConfigError("r must be >= 1")
        if 3 ** p["outer_depth"] >= p["N"]:
            raise ConfigError("outer cube 3^outer_depth must fit in the grid")
        if any(not 1 <= d <= p["outer_depth"] for d in p["escape_depths"]):
            raise ConfigError("escape depths must lie in 1..outer_depth")
    if exp == "E6":
        q, pp, s = f(p["q"]), f(p["p"]), f(p["s"])
        if not (2 < q <= pp < s):
            raise ConfigError(f"need 2 < q <= p < s, got q={q}, p={pp}, s={s}")
        if not 0 < f(p["sigma"]):
            raise ConfigError("sigma must be positive")
        if p["symbol"] not in ("bessel", "modulated"):
            raise ConfigError("symbol must be 'bessel' or 'modulated'")
        pq, pp_, pr = f(p["prop_q"]), f(p["prop_p"]), f(p["prop_r"])
        if not (1 < pq <= 2 <= pp_ <= pq / (pq - 1)):
            raise ConfigError("propagator exponents need 1 < q <= 2 <= p <= q'")
        if not 1 <= pr < pq:
            raise ConfigError("propagator r must lie in [1, q)")
        if f(p["prop_rho"]) == 0 or not -1 <= f(p["prop_rho"]) < 1:
            raise ConfigError("propagator rho must lie in [-1, 1) and be nonzero")
        if 1 / pr - 0.5 > 1 / pq - 1 / pp_ + 1e-12:
            raise ConfigError("propagator exponents need 1/r - 1/2 <= 1/q - 1/p")
    if exp == "E7":
        for row in p["exponents"]:
            if len(row) != 4:
                raise ConfigError("each exponent set is [r, q, p, s]")
            r, q, pp, s = (f(x) for x in row)
            if not (1 <= r < q <= pp < s):
                raise ConfigError(f"need 1 <= r < q <= p < s, got {row}")
    if exp == "E8" and p["max_gap"] < 2:
        raise ConfigError("max_gap must be >= 2")


def make_config(doc: dict | None = None, experiment: str | None = None, seed: int | None = None, threads: int | None = None) -> ExperimentConfig:
    """Merge a flat document over the defaults, rejecting unknown keys."""
    doc = dict(doc or {})
    exp = experiment or doc.get("experiment")
    if exp is None:
        raise ConfigError("no experiment given")
    exp = str(exp).upper()
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; valid ids: {', '.join(EXPERIMENTS)}")
    if doc.get("experiment") is not None and str(doc["experiment"]).upper() != exp:
        raise ConfigError(f"config is for {doc['experiment']}, requested {exp}")
    defaults = DEFAULTS[exp]
    unknown = sorted(set(doc) - set(defaults) - _COMMON)
    if unknown:
        raise ConfigError(f"unknown keys for {exp}: {', '.join(unknown)}")
    params = {}
    for k, d in defaults.items():
        v = doc.get(k, d)
        _check_type(k, v, d)
        params[k] = v
    _validate(exp, params)
    s = seed if seed is not None else doc.get("seed", 0)
    t = threads if threads is not None else doc.get("threads", 1)
    if not isinstance(s, int) or s < 0 or s >= 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {s!r}")
    if not isinstance(t, int) or t < 1:
        raise ConfigError(f"threads must be a positive integer, got {t!r}")
    return ExperimentConfig(exp, params, s, t)


def load_config(path, experiment: str | None = None, seed: int | None = None, threads: int | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a flat JSON object")
    return make_config(doc, experiment, seed, threads)
