"""Configuration loading, canonical JSON output, and run manifests.

A single JSON config file drives every CLI command.  Top-level sections are
optional and each maps onto one library dataclass:

``params``    overrides for :class:`~hookquad.model.SystemParams`
``mission``   a :class:`~hookquad.planner.MissionSpec` (see its ``to_dict``)
``sim``       :class:`~hookquad.sim.SimConfig` fields
``gains``     :class:`~hookquad.control.GeomGains` fields
``verify``    sample count, confidence, horizon, and region overrides
``bounds``    probe/start counts and the inflation factor
``tune``      search box, lattice/swarm sizes, and the scenario list
``reproduce`` payload masses and the verification sample count

Every command writes a ``manifest.json`` into its output directory recording
the exact command, config paths, seed, SHA-256 checksums of all written
artifacts, and wall-clock timings, so deterministic runs can be diffed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .control import GeomGains
from .model import SystemParams
from .planner import HyperParams, MissionSpec
from .sim import SimConfig

__all__ = [
    "load_config",
    "write_json",
    "sha256_file",
    "RunManifest",
    "build_params",
    "build_mission",
    "build_sim_config",
    "build_gains",
    "nominal_mission",
    "reproduce_missions",
]


def load_config(path: str) -> dict:
    """Parse a JSON config file into a plain dict."""
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config root must be a JSON object")
    return cfg


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: str, obj) -> None:
    """Write JSON with sorted keys and a trailing newline (diff-friendly)."""
    with open(path, "w") as f:
        json.dump(_jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Record of one CLI run: inputs, outputs, and timings."""

    command: str
    config_paths: list = field(default_factory=list)
    seed: int | None = None
    out_dir: str = "."
    artifacts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add_artifact(self, name: str, path: str) -> None:
        self.artifacts[name] = sha256_file(path)

    def save(self, path: str) -> None:
        write_json(path, asdict(self))


def build_params(cfg: dict) -> SystemParams:
    """SystemParams from the ``params`` section (missing keys keep defaults)."""
    section = dict(cfg.get("params", {}))
    known = {k: v for k, v in section.items() if k in SystemParams.__dataclass_fields__}
    unknown = set(section) - set(known)
    if unknown:
        raise ValueError(f"unknown params keys: {sorted(unknown)}")
    return SystemParams(**known)


def build_mission(cfg: dict) -> MissionSpec:
    """MissionSpec from the ``mission`` section (falls back to the nominal)."""
    if "mission" not in cfg:
        return nominal_mission()
    return MissionSpec.from_dict(cfg["mission"])


def build_sim_config(cfg: dict, seed: int | None = None) -> SimConfig:
    section = dict(cfg.get("sim", {}))
    known = {k: v for k, v in section.items() if k in SimConfig.__dataclass_fields__}
    unknown = set(section) - set(known)
    if unknown:
        raise ValueError(f"unknown sim keys: {sorted(unknown)}")
    if seed is not None:
        known["seed"] = seed
    return SimConfig(**known)


def build_gains(cfg: dict) -> GeomGains:
    section = dict(cfg.get("gains", {}))
    if not section:
        return GeomGains()
    return GeomGains.from_dict(section)


def nominal_mission(hyper: HyperParams | None = None) -> MissionSpec:
    """The benchmark 2 m transport used across examples and reports."""
    return MissionSpec(
        r0=np.array([-1.5, 1.0, 1.0]),
        v0=np.zeros(3),
        r_L_init=np.zeros(3),
        n_hook=np.array([1.0, 0.0, 0.0]),
        r_L_target=np.array([2.0, 0.0, 0.0]),
        target_yaw=0.0,
        r_F=np.array([3.0, 0.5, 1.0]),
        hyper=hyper if hyper is not None else HyperParams(),
    )


def reproduce_missions() -> list[tuple[MissionSpec, float]]:
    """Four (mission, payload mass) study cases: two geometries x two loads."""
    first = nominal_mission()
    second = MissionSpec(
        r0=np.array([1.0, -1.2, 0.9]),
        v0=np.zeros(3),
        r_L_init=np.array([0.3, 0.4, 0.0]),
        n_hook=np.array([0.0, 1.0, 0.0]),
        r_L_target=np.array([-1.0, 1.6, 0.0]),
        target_yaw=0.6,
        r_F=np.array([-2.0, 2.5, 1.1]),
    )
    return [(first, 0.075), (second, 0.075), (first, 0.1), (second, 0.1)]
