"""Run configuration: presets, file loading and validation.

Configuration files are YAML (JSON is accepted as a subset).  Every key is
listed in :data:`DEFAULTS`; anything else is rejected.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass

import yaml

from .exceptions import ConfigError
from .model import ProcessSpec, ReferenceDensity, constant_functional, f_theta
from .series import GridSpec
from .sim import SimMode

__all__ = ["DEFAULTS", "PRESETS", "RunConfig", "load_config"]

DEFAULT_TOLERANCES = {
    "identity_rel": 1e-9,
    "envelope_refine_rel": 0.02,
    "weight_sigma": 3.0,
    "density_sigma": 4.0,
    "series_rel": 0.05,
    "series_sigma": 3.0,
    "domination": 1e-8,
    "g_symmetry": 1e-8,
    "kato_small_ratio": 0.1,
    "semigroup_rel": 0.02,
    "truncation_rel": 0.03,
    "truncation_sigma": 3.0,
    "noise_band": 2.0,
    "lower_band": 4.0,
    "quad_tol": 1e-2,
}

DEFAULTS = {
    "preset": None,
    "alpha": 1.0,
    "dim": 1,
    "functional": "ftheta",  # ftheta | constant
    "theta": 0.3,
    "f_value": 0.5,  # used by functional=constant
    "l": 5,
    "l_compare": 20,
    "epsilon": None,  # default min(1/l, 0.01) for densities, 1/l for identities
    "mode": "asmussen_rosinski",
    "x0": 0.0,
    "horizon": 0.5,
    "t_probes": [0.25, 0.5, 1.0],
    "kato_t": [0.01, 0.1, 0.25, 0.5, 1.0],
    "ck_t": 0.25,
    "n_paths": 50000,
    "identity_paths": 1000,
    "identity_l": 2,
    "identity_horizon": 1.0,
    "identity_n_max": 5,
    "seed": 20240601,
    "x_max": 10.0,
    "nodes": 201,
    "t_quad_order": 16,
    "n_max": 4,
    "z_half": 3.0,
    "lemma_k": 0.5,
    "lemma_l": 0.25,
    "lemma_n_max": 200,
    "output_dir": "out",
    "format": "csv",
    "threads": 1,
    "tolerances": DEFAULT_TOLERANCES,
}

PRESETS = {
    "cauchy-ref": {"alpha": 1.0, "dim": 1, "functional": "ftheta", "theta": 0.0},
    "ftheta-0.3": {"alpha": 1.0, "dim": 1, "functional": "ftheta", "theta": 0.3},
}

_TYPES = {
    "alpha": float, "theta": float, "f_value": float, "x0": float, "horizon": float,
    "identity_horizon": float, "x_max": float, "z_half": float, "ck_t": float,
    "lemma_k": float, "lemma_l": float,
    "dim": int, "l": int, "l_compare": int, "n_paths": int, "identity_paths": int, "identity_l": int,
    "identity_n_max": int, "seed": int, "nodes": int, "t_quad_order": int, "n_max": int,
    "lemma_n_max": int, "threads": int,
    "functional": str, "mode": str, "output_dir": str, "format": str,
}
# keys that do not change any computed number
_UNHASHED = {"output_dir", "format", "threads"}


def _coerce(key, value, kind):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is float and isinstance(value, str):
        # YAML 1.1 reads exponent forms such as 1e-9 as strings
        try:
            return float(value)
        except ValueError:
            pass
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise ConfigError(f"config key {key!r} expects {kind.__name__}, got {value!r}", key=key)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def tol(self):
        return self.values["tolerances"]

    def canonical(self):
        data = {k: v for k, v in self.values.items() if k not in _UNHASHED}
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # -- model objects ---------------------------------------------------------
    def process(self):
        return ProcessSpec(alpha=self.alpha, dim=self.dim)

    def reference(self):
        return ReferenceDensity(alpha=self.alpha, dim=self.dim)

    def functional_spec(self, theta=None):
        spec = self.process()
        if self.values["functional"] == "constant":
            return constant_functional(self.f_value, spec)
        return f_theta(self.theta if theta is None else theta, spec)

    def grid(self):
        return GridSpec(x_max=self.x_max, n_nodes=self.nodes, t_quad_order=self.t_quad_order)

    def density_epsilon(self, l=None):
        l = self.l if l is None else l
        return min(1.0 / l, 0.01) if self.epsilon is None else self.epsilon

    def replace(self, **changes):
        merged = dict(self.values)
        merged.update(changes)
        return build_config(merged)


def build_config(raw):
    """Validate a mapping of keys (after preset expansion) into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping", key="<root>")
    values = copy.deepcopy(DEFAULTS)
    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}", key="preset")
        values.update(PRESETS[preset])
    for key, value in raw.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        if key == "tolerances":
            if not isinstance(value, dict):
                raise ConfigError("tolerances must be a mapping", key=key)
            tol = dict(DEFAULT_TOLERANCES)
            for tk, tv in value.items():
                if tk not in DEFAULT_TOLERANCES:
                    raise ConfigError(f"unknown tolerance {tk!r}", key=f"tolerances.{tk}")
                tol[tk] = _coerce(f"tolerances.{tk}", tv, float)
            values[key] = tol
        elif key in ("t_probes", "kato_t"):
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{key} must be a nonempty list", key=key)
            values[key] = [_coerce(key, v, float) for v in value]
        elif key == "epsilon":
            values[key] = None if value is None else _coerce(key, value, float)
        elif key == "preset":
            values[key] = value
        else:
            values[key] = _coerce(key, value, _TYPES[key])
    _validate(values)
    return RunConfig(values)


def _validate(v):
    if not 0 < v["alpha"] < 2:
        raise ConfigError("alpha must lie in (0, 2)", key="alpha")
    if v["dim"] < 1:
        raise ConfigError("dim must be >= 1", key="dim")
    if v["functional"] not in ("ftheta", "constant"):
        raise ConfigError("functional must be 'ftheta' or 'constant'", key="functional")
    if v["functional"] == "ftheta" and not v["theta"] > -math.e:
        raise ConfigError("theta too negative: inf F must exceed -1", key="theta")
    try:
        SimMode(v["mode"])
    except ValueError:
        raise ConfigError(f"unknown mode {v['mode']!r}", key="mode") from None
    if v["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json", key="format")
    for key in ("l", "l_compare", "identity_l", "n_paths", "identity_paths", "nodes", "t_quad_order",
                "n_max", "identity_n_max", "lemma_n_max", "threads"):
        if v[key] < 1:
            raise ConfigError(f"{key} must be positive", key=key)
    if v["identity_n_max"] > 12:
        raise ConfigError("identity_n_max must be <= 12", key="identity_n_max")
    if v["t_quad_order"] % 2:
        raise ConfigError("t_quad_order must be even", key="t_quad_order")
    if v["nodes"] % 2 == 0:
        raise ConfigError("nodes must be odd so that 0 is a node", key="nodes")
    for key in ("horizon", "identity_horizon", "ck_t", "x_max", "z_half"):
        if not v[key] > 0:
            raise ConfigError(f"{key} must be positive", key=key)
    for key in ("t_probes", "kato_t"):
        ts = v[key]
        if any(t <= 0 for t in ts) or sorted(ts) != ts:
            raise ConfigError(f"{key} must be positive and ascending", key=key)
    if v["epsilon"] is not None and not 0 < v["epsilon"] <= 1.0 / v["l"]:
        raise ConfigError("epsilon must lie in (0, 1/l]", key="epsilon")
    if not 0 < v["lemma_k"] < 1:
        raise ConfigError("lemma_k must lie in (0, 1)", key="lemma_k")


def load_config(path=None, preset=None, overrides=None):
    """Read a YAML/JSON config file, apply a preset and flat overrides."""
    raw = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}", key="--config") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config file: {exc}", key="--config") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("configuration must be a mapping", key="<root>")
        raw.update(loaded)
    if preset is not None:
        raw["preset"] = preset
    if overrides:
        raw.update(overrides)
    return build_config(raw)
