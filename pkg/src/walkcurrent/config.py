"""Experiment configuration: JSON schema, validation, canonical hashing.

One JSON file describes one experiment.  Keys are validated eagerly so that
a bad config fails with a message naming the offending key, before any
compute starts.  The canonical hash covers the resolved config (defaults
filled, CLI overrides applied) and deliberately excludes runtime-only knobs
such as worker count and output directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigParseError, ConfigValidationError
from .kernel import JumpKernel, validate_kernel
from .occupancy import OccupancyModel
from .simulate import ExperimentConfig

SCHEMA_VERSION = 1

DEFAULTS = {
    "window_tol": 1e-6,
    "quad_tol": 1e-10,
    "master_seed": 0,
    "bands": {
        "cov_z": 4.0,
        "cov_rel": 0.10,
        "mean_ratio": 3.0,
        "slope_lo": 0.45,
        "slope_hi": 0.55,
        "duality_tol": 1e-6,
        "skew_band": 0.1,
        "kurt_band": 0.2,
        "ks_p_min": 0.01,
    },
}

RUNTIME_KEYS = ("workers", "out", "format")

SIM_KEYS = ("n", "T", "S", "t_grid", "r_grid", "kernel", "occupancy", "replicas")


def build_kernel(pairs) -> JumpKernel:
    from .errors import WalkCurrentError

    try:
        return validate_kernel({int(off): float(w) for off, w in pairs})
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"kernel: expected [[offset, weight], ...]: {exc}")
    except WalkCurrentError as exc:
        raise ConfigValidationError(f"kernel: {exc}")


def build_occupancy(obj) -> OccupancyModel:
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigValidationError("occupancy: expected {'type': ..., ...}")
    kind = obj["type"]
    try:
        if kind == "poisson":
            return OccupancyModel.poisson(float(obj["rho"]))
        if kind == "deterministic":
            return OccupancyModel.deterministic(int(obj["count"]))
        if kind == "geometric":
            return OccupancyModel.geometric(float(obj["rho"]))
        if kind == "custom":
            return OccupancyModel.custom([(int(v), float(p)) for v, p in obj["pmf"]])
    except KeyError as exc:
        raise ConfigValidationError(f"occupancy '{kind}' is missing field {exc}")
    except ValueError as exc:
        raise ConfigValidationError(f"occupancy: {exc}")
    raise ConfigValidationError(f"occupancy type {kind!r} is not one of "
                                "poisson/deterministic/geometric/custom")


def canonical_hash(resolved: dict) -> str:
    """Stable hex digest of the config, independent of key order."""
    clean = {k: v for k, v in resolved.items() if k not in RUNTIME_KEYS}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunSpec:
    """A fully resolved experiment description."""

    raw: dict
    config_hash: str
    bands: dict
    experiment: Optional[ExperimentConfig] = None
    occupancy: Optional[OccupancyModel] = None
    kernel: Optional[JumpKernel] = None
    ldp: Optional[dict] = None
    fidi: Optional[dict] = None
    limit: Optional[dict] = None
    retain_points: tuple = ()


def _require(raw: dict, keys, command: str):
    missing = [k for k in keys if k not in raw]
    if missing:
        raise ConfigValidationError(
            f"command '{command}' needs config keys: {', '.join(missing)}")


def load_config(path: str, overrides: Optional[dict] = None,
                command: str = "simulate") -> RunSpec:
    """Parse, default-fill, override, validate, and hash a config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigParseError(
            f"config {path} is not valid JSON (line {exc.lineno}, col {exc.colno}): "
            f"{exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigValidationError("config root must be a JSON object")

    resolved = dict(raw)
    for key, val in DEFAULTS.items():
        if key == "bands":
            bands = dict(DEFAULTS["bands"])
            bands.update(resolved.get("bands", {}))
            resolved["bands"] = bands
        else:
            resolved.setdefault(key, val)
    if overrides:
        for k, v in overrides.items():
            if v is not None:
                resolved[k] = v

    spec = RunSpec(raw=resolved, config_hash=canonical_hash(resolved),
                   bands=resolved["bands"])

    if "kernel" in resolved:
        spec.kernel = build_kernel(resolved["kernel"])
    if "occupancy" in resolved:
        spec.occupancy = build_occupancy(resolved["occupancy"])

    needs_sim = command in ("simulate", "cov-check", "fbm-check", "rate-empirical")
    if needs_sim:
        _require(resolved, SIM_KEYS, command)
        try:
            spec.experiment = ExperimentConfig(
                n=int(resolved["n"]),
                T=float(resolved["T"]),
                S=float(resolved["S"]),
                t_grid=tuple(float(t) for t in resolved["t_grid"]),
                r_grid=tuple(float(r) for r in resolved["r_grid"]),
                kernel=spec.kernel,
                occupancy=spec.occupancy,
                master_seed=int(resolved["master_seed"]),
                replicas=int(resolved["replicas"]),
                window_tol=float(resolved["window_tol"]),
            )
        except ValueError as exc:
            raise ConfigValidationError(str(exc))

    if command in ("rate-table", "rate-empirical", "fidi"):
        if command != "fidi":
            if spec.occupancy is None:
                raise ConfigValidationError("rate commands need an occupancy model")
            if not spec.occupancy.mgf_domain_is_real:
                raise ConfigValidationError(
                    "rate commands need an occupancy law with an everywhere-finite "
                    "log-MGF; geometric occupancy has a finite radius and is rejected")
        section = resolved.get("ldp", {})
        if command == "rate-table":
            _require(section, ("t", "x_grid"), "rate-table (ldp section)")
        if command == "rate-empirical":
            _require(section, ("t", "r", "x", "samples", "n_values"),
                     "rate-empirical (ldp section)")
        if command != "fidi":
            kappa2 = section.get("kappa2")
            if kappa2 is None:
                if spec.kernel is None:
                    raise ConfigValidationError(
                        "ldp section needs 'kappa2' or a top-level kernel")
                kappa2 = spec.kernel.kappa2
            spec.ldp = dict(section, kappa2=float(kappa2))

    if command == "fidi":
        section = resolved.get("fidi")
        if not section:
            raise ConfigValidationError("command 'fidi' needs a 'fidi' section")
        _require(section, ("times", "rho", "kappa2", "x_vectors"), "fidi")
        spec.fidi = section

    if command == "limit-tables":
        section = resolved.get("limit", {})
        spec.limit = section

    spec.retain_points = tuple(
        (float(t), float(r)) for t, r in resolved.get("retain_points", []))
    return spec
