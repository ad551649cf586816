"""Experiment configuration: strict YAML loading with full defaults.

A config document may specify any subset of the keys below; omitted keys
take the built-in defaults and unknown keys are rejected with the exact
field path, so a typo never silently falls back. The fully-resolved
configuration is recorded into every run manifest.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .moga import GaConfig
from .plant import ArmModel

_MISSING = object()


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def default_config_dict() -> dict:
    """The complete built-in configuration."""
    return {
        "dt": 0.002,  # 500 Hz control loop
        "elbow_branch": "down",
        "replications": 5,
        "base_seed": 1000,
        "model": {
            "n_links": 2,
            "link_lengths": [1.0, 0.8],
            "link_masses": [2.0, 1.5],
            "viscous_damping": [0.1, 0.1],
            "torque_limits": [50.0, 50.0],
            "gravity": 9.81,
            "base_position": [0.0, 0.0],
        },
        "ga": {
            "population_size": 30,
            "max_generations": 60,
            "crossover_probability": 0.9,
            "sbx_eta": 15.0,
            "mutation_probability": None,
            "mutation_eta": 20.0,
            "kp_bounds": [1.0, 1000.0],
            "kd_bounds": [0.01, 100.0],
            "convergence_window": 10,
            "convergence_epsilon": 1.0e-3,
        },
        "trajectories": [
            # 3 turns makes the 3 s speed-study variant brush the actuator
            # limits (peak feedforward torque ~2x the 50 N.m bound) while
            # the 5 s default and 6 s variant stay comfortably feasible
            {"id": "spiral", "kind": "spiral", "duration": 5.0,
             "center": [0.95, 0.0], "r0": 0.15, "r1": 0.55, "turns": 3.0},
            {"id": "pyramid", "kind": "pyramid", "duration": 5.0,
             "center": [0.9, -0.3], "half_width": 0.45, "height": 0.5, "n_teeth": 2},
            {"id": "random", "kind": "random", "duration": 5.0,
             "seed": 42, "n_waypoints": 8},
        ],
        "popsweep": {"sizes": [10, 20, 30, 50, 80], "trajectory": "spiral"},
        "generic_vs_specific": {"target": "pyramid"},
        "speed_study": {"trajectory": "spiral", "durations": [3.0, 4.0, 5.0, 6.0]},
        "dataset": {"max_front_members": None},
    }


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected a mapping, got {type(node).__name__}")
    return node


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _as_str(value, path):
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    return value


def _as_float_list(value, path, length=None):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, f"expected a list, got {value!r}")
    out = tuple(_as_float(v, f"{path}[{i}]") for i, v in enumerate(value))
    if length is not None and len(out) != length:
        raise ConfigError(path, f"expected {length} entries, got {len(out)}")
    return out


class _Section:
    """One mapping level: tracks consumed keys and reports leftovers."""

    def __init__(self, data, path):
        self.data = _require_mapping(data, path or "<root>")
        self.path = path
        self.seen = set()

    def _child(self, key):
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, default=_MISSING):
        self.seen.add(key)
        if key in self.data:
            return self.data[key]
        if default is _MISSING:
            raise ConfigError(self._child(key), "required key missing")
        return default

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(self._child(key), "unknown key")


@dataclass(frozen=True)
class TrajectorySpec:
    id: str
    kind: str
    duration: float
    params: dict

    def with_duration(self, duration: float) -> "TrajectorySpec":
        return TrajectorySpec(id=self.id, kind=self.kind, duration=duration,
                              params=dict(self.params))


_TRAJECTORY_PARAM_KEYS = {
    "spiral": ("center", "r0", "r1", "turns"),
    "pyramid": ("center", "half_width", "height", "n_teeth"),
    "random": ("seed", "n_waypoints"),
}


def _parse_trajectory(node, path) -> TrajectorySpec:
    sec = _Section(node, path)
    traj_id = _as_str(sec.get("id"), f"{path}.id")
    kind = _as_str(sec.get("kind"), f"{path}.kind")
    if kind not in _TRAJECTORY_PARAM_KEYS:
        raise ConfigError(f"{path}.kind",
                          f"unknown kind {kind!r} (expected spiral, pyramid or random)")
    duration = _as_float(sec.get("duration"), f"{path}.duration")
    params = {}
    for key in _TRAJECTORY_PARAM_KEYS[kind]:
        value = sec.get(key)
        kpath = f"{path}.{key}"
        if key == "center":
            params[key] = _as_float_list(value, kpath, length=2)
        elif key in ("n_teeth", "seed", "n_waypoints"):
            params[key] = _as_int(value, kpath)
        else:
            params[key] = _as_float(value, kpath)
    sec.finish()
    return TrajectorySpec(id=traj_id, kind=kind, duration=duration, params=params)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ArmModel
    dt: float
    elbow_branch: str
    ga: dict
    replications: int
    base_seed: int
    trajectories: tuple[TrajectorySpec, ...]
    popsweep_sizes: tuple[int, ...]
    popsweep_trajectory: str
    gvs_target: str
    speed_trajectory: str
    speed_durations: tuple[float, ...]
    dataset_max_members: int | None

    def trajectory_spec(self, traj_id: str) -> TrajectorySpec:
        for spec in self.trajectories:
            if spec.id == traj_id:
                return spec
        known = ", ".join(s.id for s in self.trajectories)
        raise ConfigError("trajectories", f"no trajectory with id {traj_id!r} (have: {known})")

    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.replications)]

    def ga_config(self, rng_seed: int, population_size: int | None = None,
                  max_generations: int | None = None) -> GaConfig:
        ga = self.ga
        return GaConfig(
            n_genes=2 * self.model.n_links,
            population_size=population_size or ga["population_size"],
            max_generations=max_generations or ga["max_generations"],
            crossover_probability=ga["crossover_probability"],
            sbx_eta=ga["sbx_eta"],
            mutation_probability=ga["mutation_probability"],
            mutation_eta=ga["mutation_eta"],
            kp_bounds=tuple(ga["kp_bounds"]),
            kd_bounds=tuple(ga["kd_bounds"]),
            convergence_window=ga["convergence_window"],
            convergence_epsilon=ga["convergence_epsilon"],
            rng_seed=rng_seed,
        )

    def resolved(self) -> dict:
        """Fully-expanded configuration for run manifests."""
        return {
            "dt": self.dt,
            "elbow_branch": self.elbow_branch,
            "replications": self.replications,
            "base_seed": self.base_seed,
            "model": {
                "n_links": self.model.n_links,
                "link_lengths": list(self.model.link_lengths),
                "link_masses": list(self.model.link_masses),
                "viscous_damping": list(self.model.viscous_damping),
                "torque_limits": list(self.model.torque_limits),
                "gravity": self.model.gravity,
                "base_position": list(self.model.base_position),
            },
            "ga": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.ga.items()},
            "trajectories": [
                {"id": s.id, "kind": s.kind, "duration": s.duration,
                 **{k: (list(v) if isinstance(v, tuple) else v) for k, v in s.params.items()}}
                for s in self.trajectories
            ],
            "popsweep": {"sizes": list(self.popsweep_sizes),
               "trajectory": self.popsweep_trajectory},
            "generic_vs_specific": {"target": self.gvs_target},
            "speed_study": {"trajectory": self.speed_trajectory,
                            "durations": list(self.speed_durations)},
            "dataset": {"max_front_members": self.dataset_max_members},
        }


def parse_config(doc: dict | None) -> ExperimentConfig:
    """Validate a (possibly partial) config mapping against the schema."""
    merged = default_config_dict()
    doc = {} if doc is None else _require_mapping(doc, "<root>")

    root = _Section(doc, "")
    dt = _as_float(root.get("dt", merged["dt"]), "dt")
    branch = _as_str(root.get("elbow_branch", merged["elbow_branch"]), "elbow_branch")
    if branch not in ("down", "up"):
        raise ConfigError("elbow_branch", f"expected 'down' or 'up', got {branch!r}")
    replications = _as_int(root.get("replications", merged["replications"]), "replications")
    if replications < 1:
        raise ConfigError("replications", "must be >= 1")
    base_seed = _as_int(root.get("base_seed", merged["base_seed"]), "base_seed")

    msec = _Section(root.get("model", merged["model"]), "model")
    n_links = _as_int(msec.get("n_links", merged["model"]["n_links"]), "model.n_links")
    dm = merged["model"]
    try:
        model = ArmModel(
            n_links=n_links,
            link_lengths=_as_float_list(msec.get("link_lengths", dm["link_lengths"]),
                                        "model.link_lengths"),
            link_masses=_as_float_list(msec.get("link_masses", dm["link_masses"]),
                                       "model.link_masses"),
            viscous_damping=_as_float_list(msec.get("viscous_damping", dm["viscous_damping"]),
                                           "model.viscous_damping"),
            torque_limits=_as_float_list(msec.get("torque_limits", dm["torque_limits"]),
                                         "model.torque_limits"),
            gravity=_as_float(msec.get("gravity", dm["gravity"]), "model.gravity"),
            base_position=_as_float_list(msec.get("base_position", dm["base_position"]),
                                         "model.base_position", length=2),
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError("model", str(err)) from err
    msec.finish()

    gsec = _Section(root.get("ga", merged["ga"]), "ga")
    dg = merged["ga"]
    ga = {
        "population_size": _as_int(gsec.get("population_size", dg["population_size"]),
                                   "ga.population_size"),
        "max_generations": _as_int(gsec.get("max_generations", dg["max_generations"]),
                                   "ga.max_generations"),
        "crossover_probability": _as_float(
            gsec.get("crossover_probability", dg["crossover_probability"]),
            "ga.crossover_probability"),
        "sbx_eta": _as_float(gsec.get("sbx_eta", dg["sbx_eta"]), "ga.sbx_eta"),
        "mutation_probability": None,
        "mutation_eta": _as_float(gsec.get("mutation_eta", dg["mutation_eta"]),
                                  "ga.mutation_eta"),
        "kp_bounds": _as_float_list(gsec.get("kp_bounds", dg["kp_bounds"]),
                                    "ga.kp_bounds", length=2),
        "kd_bounds": _as_float_list(gsec.get("kd_bounds", dg["kd_bounds"]),
                                    "ga.kd_bounds", length=2),
        "convergence_window": _as_int(gsec.get("convergence_window", dg["convergence_window"]),
                                      "ga.convergence_window"),
        "convergence_epsilon": _as_float(
            gsec.get("convergence_epsilon", dg["convergence_epsilon"]),
            "ga.convergence_epsilon"),
    }
    pm = gsec.get("mutation_probability", dg["mutation_probability"])
    if pm is not None:
        pm = _as_float(pm, "ga.mutation_probability")
    ga["mutation_probability"] = pm
    gsec.finish()

    tnode = root.get("trajectories", merged["trajectories"])
    if not isinstance(tnode, list) or not tnode:
        raise ConfigError("trajectories", "expected a non-empty list")
    trajectories = tuple(_parse_trajectory(node, f"trajectories[{i}]")
                         for i, node in enumerate(tnode))
    ids = [s.id for s in trajectories]
    if len(set(ids)) != len(ids):
        raise ConfigError("trajectories", f"duplicate trajectory ids in {ids}")

    psec = _Section(root.get("popsweep", merged["popsweep"]), "popsweep")
    sizes_node = psec.get("sizes", merged["popsweep"]["sizes"])
    if not isinstance(sizes_node, list) or not sizes_node:
        raise ConfigError("popsweep.sizes", "expected a non-empty list")
    sizes = tuple(_as_int(v, f"popsweep.sizes[{i}]") for i, v in enumerate(sizes_node))
    popsweep_traj = _as_str(psec.get("trajectory", merged["popsweep"]["trajectory"]),
                            "popsweep.trajectory")
    psec.finish()

    vsec = _Section(root.get("generic_vs_specific", merged["generic_vs_specific"]),
                    "generic_vs_specific")
    gvs_target = _as_str(vsec.get("target", merged["generic_vs_specific"]["target"]),
                         "generic_vs_specific.target")
    vsec.finish()

    ssec = _Section(root.get("speed_study", merged["speed_study"]), "speed_study")
    speed_traj = _as_str(ssec.get("trajectory", merged["speed_study"]["trajectory"]),
                         "speed_study.trajectory")
    durations = _as_float_list(ssec.get("durations", merged["speed_study"]["durations"]),
                               "speed_study.durations")
    if not durations:
        raise ConfigError("speed_study.durations", "expected a non-empty list")
    ssec.finish()

    dsec = _Section(root.get("dataset", merged["dataset"]), "dataset")
    max_members = dsec.get("max_front_members", merged["dataset"]["max_front_members"])
    if max_members is not None:
        max_members = _as_int(max_members, "dataset.max_front_members")
        if max_members < 1:
            raise ConfigError("dataset.max_front_members", "must be >= 1 or null")
    dsec.finish()
    root.finish()

    cfg = ExperimentConfig(model=model, dt=dt, elbow_branch=branch, ga=ga,
                           replications=replications, base_seed=base_seed,
                           trajectories=trajectories, popsweep_sizes=sizes,
                           popsweep_trajectory=popsweep_traj, gvs_target=gvs_target,
                           speed_trajectory=speed_traj, speed_durations=durations,
                           dataset_max_members=max_members)
    # referenced ids must exist; GaConfig invariants must hold
    cfg.trajectory_spec(popsweep_traj)
    cfg.trajectory_spec(gvs_target)
    cfg.trajectory_spec(speed_traj)
    try:
        cfg.ga_config(rng_seed=0)
    except ValueError as err:
        raise ConfigError("ga", str(err)) from err
    return cfg


def load_config(path=None) -> ExperimentConfig:
    """Load a YAML config file, or the built-in defaults when path is None."""
    if path is None:
        return parse_config(None)
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError("<file>", f"not valid YAML: {err}") from err
    return parse_config(doc)
