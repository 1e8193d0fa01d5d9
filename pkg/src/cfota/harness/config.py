"""Experiment configuration: nested YAML plus dotted-path overrides.

A config file mirrors the dataclass tree (network, csi, fl, task plus
top-level scalars).  Override strings like ``fl.eta=0.05`` are applied
to the raw dictionary before the dataclasses are built, with values
parsed as YAML scalars so numbers, booleans and lists come out typed.
Unknown keys fail with the full key path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import yaml

from ..channel import CsiConfig
from ..fl import FlConfig
from ..topology import NetworkConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    """Which synthetic objective to build and its shape."""

    kind: str = "quadratic"  # "quadratic" | "logistic"
    dim: int = 20
    # quadratic
    heterogeneity_scale: float = 1.0
    anchors_per_client: int = 16
    anchor_spread: float = 0.5
    curvature_min: float = 0.5
    curvature_max: float = 1.5
    # logistic
    samples_per_client: int = 50
    lam: float = 0.1
    class_sep: float = 2.0
    split: str = "iid"
    holdout: int = 200

    def __post_init__(self):
        if self.kind not in ("quadratic", "logistic"):
            raise ConfigError(f"unknown task kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigError("task dim must be >= 1")
        if self.split not in ("iid", "noniid"):
            raise ConfigError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    network: NetworkConfig
    csi: CsiConfig
    fl: FlConfig
    task: TaskSpec
    seed: int = 0
    repetitions: int = 1
    with_bound: bool = False
    grad_bound_margin: float = 2.0


def default_config():
    """Raw dictionary for a small desk-scale experiment."""
    return {
        # dense enough that cluster masking suppresses cross-client
        # leakage; sparser layouts plateau near the starting distance
        "network": {
            "num_uts": 40,
            "num_aps": 40,
            "antennas_per_ap": 2,
            "area_side": 500.0,
            "shadowing_std_db": 4.0,
            "correlation": "identity",
            "association": "top_q",
            "cluster_size": 4,
        },
        # pilot_snr and noise_std are linear against the raw path gains
        # (1e-12-ish at a few hundred meters), hence the magnitudes here
        "csi": {"mode": "mmse", "pilot_snr": 1e9},
        "fl": {
            "rounds": 50,
            "local_steps": 1,
            "eta": 0.05,
            "batch_size": 8,
            "aggregation": "ota",
            "alpha": 1.0,
            "noise_std": 2e-6,
        },
        "task": {"kind": "quadratic", "dim": 20},
        "seed": 0,
        "repetitions": 1,
        "with_bound": False,
    }


_SECTIONS = {
    "network": NetworkConfig,
    "csi": CsiConfig,
    "fl": FlConfig,
    "task": TaskSpec,
}


def _build_section(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}: unknown key")
    coerced = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.type in ("int",) and isinstance(value, bool):
            raise ConfigError(f"{path}.{f.name}: expected an integer")
        if f.type == "float" and isinstance(value, int):
            value = float(value)
        if isinstance(value, list):
            value = tuple(value)
        coerced[f.name] = value
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_spec(data):
    """Construct an ExperimentSpec from a raw (merged) dictionary."""
    data = dict(data)
    sections = {}
    for key, cls in _SECTIONS.items():
        sections[key] = _build_section(cls, data.pop(key, {}), key)
    known = {"seed", "repetitions", "with_bound", "grad_bound_margin"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    try:
        return ExperimentSpec(**sections, **data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def merge_config(base, update):
    merged = dict(base)
    for key, value in update.items():
        if (
            key in merged
            and isinstance(merged[key], dict)
            and isinstance(value, dict)
        ):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_override(data, assignment):
    """Apply one ``dotted.path=value`` string in place."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    if not all(keys):
        raise ConfigError(f"override {assignment!r}: empty key component")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {assignment!r}: bad value ({exc})")
    if isinstance(value, str):
        # YAML 1.1 reads "1e-8" as a string; accept plain float notation
        try:
            value = float(value)
        except ValueError:
            pass
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {path}: {key} is not a section")
    node[keys[-1]] = value
    return data


def spec_to_dict(spec):
    return dataclasses.asdict(spec)


def config_hash(spec):
    """Short stable digest of the full spec (reproducibility stamp)."""
    payload = json.dumps(spec_to_dict(spec), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
