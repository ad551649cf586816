"""Experiment drivers behind the CLI subcommands.

Each driver owns one output directory, writes a manifest.json holding the
fully-resolved configuration (so a run is reproducible from its output
alone), and emits machine-readable CSV summaries. Replicated runs derive
their seeds as base_seed + replicate index.
"""

from __future__ import annotations

import functools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, TrajectorySpec
from .dataset_io import (_fmt, atomic_write_text, manifest_for, read_front,
                         read_rollout, write_front, write_rollout)
from .moga import GaConfig, decode_gains, nsga2_run
from .pareto import ParetoFront, extract_front, hypervolume_2d, reference_point
from .plant import CartesianPoint
from .rollout import PENALTY, ObjectiveVector, evaluate, simulate
from .trajectory import (CartesianTrajectory, Workspace, gen_pyramid, gen_random,
                         gen_spiral, to_joint_setpoints)


def build_cartesian(cfg: ExperimentConfig, spec: TrajectorySpec) -> CartesianTrajectory:
    ws = Workspace.from_model(cfg.model)
    p = spec.params
    if spec.kind == "spiral":
        return gen_spiral(CartesianPoint(*p["center"]), p["r0"], p["r1"], p["turns"],
                          spec.duration, cfg.dt, ws)
    if spec.kind == "pyramid":
        return gen_pyramid(CartesianPoint(*p["center"]), p["half_width"], p["height"],
                           p["n_teeth"], spec.duration, cfg.dt, ws)
    if spec.kind == "random":
        return gen_random(p["seed"], ws, p["n_waypoints"], spec.duration, cfg.dt)
    raise ValueError(f"unknown trajectory kind {spec.kind!r}")


def build_setpoints(cfg: ExperimentConfig, spec: TrajectorySpec):
    return to_joint_setpoints(cfg.model, build_cartesian(cfg, spec), cfg.elbow_branch)


def genome_objectives(genes, model, jtrajs, ga_cfg) -> ObjectiveVector:
    """Decode a genome and score it; multiple trajectories average their
    per-trajectory objectives (the generic-controller objective)."""
    gains = decode_gains(genes, ga_cfg)
    objs = [evaluate(model, jt, gains) for jt in jtrajs]
    return ObjectiveVector(float(np.mean([o.f_acc for o in objs])),
                           float(np.mean([o.f_t for o in objs])))


@contextmanager
def evaluation_map(jobs: int):
    """Order-preserving parallel map for offspring evaluation (None = serial)."""
    if jobs <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield lambda func, items: list(pool.map(func, items))


def _progress_printer(label, rows):
    def callback(p):
        rows.append(p)
        print(f"[{label}] generation {p.generation} evaluations {p.evaluations} "
              f"front {p.front_size} hypervolume {p.hypervolume:.6g}", file=sys.stderr)
    return callback


def _write_history(rows, path, overwrite=False):
    if Path(path).exists() and not overwrite:
        raise FileExistsError(f"{path} exists (pass --overwrite to replace)")
    lines = ["generation,evaluations,front_size,hypervolume"]
    lines += [f"{r.generation},{r.evaluations},{r.front_size},{_fmt(r.hypervolume)}"
              for r in rows]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def _write_summary(path, header, rows, overwrite=False):
    if Path(path).exists() and not overwrite:
        raise FileExistsError(f"{path} exists (pass --overwrite to replace)")
    atomic_write_text(Path(path), "\n".join([header] + rows) + "\n")


def _write_run_manifest(out_dir, command, cfg, extra=None):
    payload = {"command": command, "tool_version": __version__,
               "config": cfg.resolved()}
    payload.update(extra or {})
    atomic_write_text(Path(out_dir) / "manifest.json",
                      json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _tune_once(cfg, jtrajs, ga_cfg, label, eval_map, out_dir=None, overwrite=False):
    """One GA run; optionally writes front.csv and history.csv to out_dir."""
    evaluator = functools.partial(genome_objectives, model=cfg.model,
                                  jtrajs=tuple(jtrajs), ga_cfg=ga_cfg)
    rows = []
    result = nsga2_run(evaluator, ga_cfg, progress=_progress_printer(label, rows),
                       eval_map=eval_map, label=label)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        gains = [decode_gains(g, ga_cfg) for g in result.front.genomes]
        front_path = out / "front.csv"
        if front_path.exists() and not overwrite:
            raise FileExistsError(f"{front_path} exists (pass --overwrite to replace)")
        write_front(result.front, gains, front_path,
                    n_joints=cfg.model.n_links, overwrite=True)
        _write_history(rows, out / "history.csv", overwrite=True)
    return result


def run_tune(cfg: ExperimentConfig, trajectory_id: str, out_dir, seed=None,
             jobs: int = 1, overwrite: bool = False, write_rollouts: bool = True,
             population_size=None, max_generations=None):
    """Tune PD gains on one trajectory; emit front, history and one rollout
    per front member."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.base_seed if seed is None else seed
    spec = cfg.trajectory_spec(trajectory_id)
    traj = build_cartesian(cfg, spec)
    jtraj = to_joint_setpoints(cfg.model, traj, cfg.elbow_branch)
    ga_cfg = cfg.ga_config(rng_seed=seed, population_size=population_size,
                           max_generations=max_generations)
    with evaluation_map(jobs) as emap:
        result = _tune_once(cfg, [jtraj], ga_cfg, trajectory_id, emap,
                            out_dir=out, overwrite=overwrite)
    gains = [decode_gains(g, ga_cfg) for g in result.front.genomes]
    if write_rollouts:
        rollout_dir = out / "rollouts"
        rollout_dir.mkdir(exist_ok=True)
        for idx, (point, gain) in enumerate(zip(result.front.points, gains)):
            if point.f_acc >= PENALTY:
                continue
            log = simulate(cfg.model, jtraj, gain)
            manifest = manifest_for(cfg.model, log, objectives=point,
                                    trajectory_params=traj.params)
            write_rollout(log, manifest, rollout_dir / f"member_{idx:03d}.csv",
                          overwrite=overwrite)
    _write_run_manifest(out, "tune", cfg,
                        {"trajectory": trajectory_id, "seed": seed,
                         "evaluations_used": result.evaluations_used,
                         "generations_run": result.generations_run,
                         "converged_at_generation": result.converged_at_generation,
                         "hv_reference": list(result.hv_reference)})
    return result


def run_popsweep(cfg: ExperimentConfig, out_dir, jobs: int = 1, overwrite: bool = False):
    """Population-size sweep: full tuning runs per (size, seed), summarized
    with one shared hypervolume reference across every run's front."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.trajectory_spec(cfg.popsweep_trajectory)
    jtraj = build_setpoints(cfg, spec)
    runs = []
    with evaluation_map(jobs) as emap:
        for size in cfg.popsweep_sizes:
            for seed in cfg.seeds():
                ga_cfg = cfg.ga_config(rng_seed=seed, population_size=size)
                label = f"pop{size}/seed{seed}"
                run_dir = out / "runs" / f"size{size}_seed{seed}"
                result = _tune_once(cfg, [jtraj], ga_cfg, label, emap,
                                    out_dir=run_dir, overwrite=overwrite)
                runs.append((size, seed, result))
    ref = reference_point([r.front for _, _, r in runs])
    rows = [f"{size},{seed},{r.evaluations_used},{_fmt(hypervolume_2d(r.front, ref))}"
            for size, seed, r in runs]
    _write_summary(out / "summary.csv",
                   "population_size,seed,evaluations_to_convergence,final_hypervolume",
                   rows, overwrite=overwrite)
    _write_run_manifest(out, "popsweep", cfg,
                        {"trajectory": cfg.popsweep_trajectory,
                         "sizes": list(cfg.popsweep_sizes), "seeds": cfg.seeds(),
                         "reference_point": list(ref)})
    return out / "summary.csv"


def reevaluate_front(cfg: ExperimentConfig, front: ParetoFront, ga_cfg: GaConfig,
                     jtraj, label: str = "") -> tuple[ParetoFront, list[ObjectiveVector]]:
    """Transfer a front's decoded gains onto another trajectory: re-simulate
    every member and extract the front of what actually came back."""
    points = [evaluate(cfg.model, jtraj, decode_gains(g, ga_cfg)) for g in front.genomes]
    return extract_front(points, genomes=list(front.genomes), label=label), points


def run_generic_vs_specific(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                            overwrite: bool = False):
    """Per seed: tune on the mean objectives over every configured
    trajectory (generic) and on the target alone (specific); compare both
    on the target with one shared reference point."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = cfg.trajectory_spec(cfg.gvs_target)
    target_jt = build_setpoints(cfg, target)
    all_jts = [build_setpoints(cfg, s) for s in cfg.trajectories]
    per_seed = []
    with evaluation_map(jobs) as emap:
        for seed in cfg.seeds():
            ga_cfg = cfg.ga_config(rng_seed=seed)
            generic = _tune_once(cfg, all_jts, ga_cfg, f"generic/seed{seed}", emap)
            specific = _tune_once(cfg, [target_jt], ga_cfg, f"specific/seed{seed}", emap)
            generic_on_target, _ = reevaluate_front(cfg, generic.front, ga_cfg,
                                                    target_jt, label=f"generic@{target.id}")
            per_seed.append((seed, ga_cfg, generic_on_target, specific.front))
    ref = reference_point([f for _, _, g, s in per_seed for f in (g, s)])
    rows = []
    for seed, ga_cfg, generic_front, specific_front in per_seed:
        seed_dir = out / f"seed{seed}"
        seed_dir.mkdir(exist_ok=True)
        for name, front in (("generic_front.csv", generic_front),
                            ("specific_front.csv", specific_front)):
            gains = [decode_gains(g, ga_cfg) for g in front.genomes]
            path = seed_dir / name
            if path.exists() and not overwrite:
                raise FileExistsError(f"{path} exists (pass --overwrite to replace)")
            write_front(front, gains, path, n_joints=cfg.model.n_links, overwrite=True)
        hv_generic = hypervolume_2d(generic_front, ref)
        hv_specific = hypervolume_2d(specific_front, ref)
        rows.append(f"{seed},{target.id},{_fmt(hv_generic)},{_fmt(hv_specific)}")
    _write_summary(out / "summary.csv",
                   "seed,target_trajectory,generic_hypervolume,specific_hypervolume",
                   rows, overwrite=overwrite)
    _write_run_manifest(out, "generic-vs-specific", cfg,
                        {"target": target.id, "seeds": cfg.seeds(),
                         "reference_point": list(ref)})
    return out / "summary.csv"


def run_speed_study(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                    overwrite: bool = False):
    """Tune one trajectory shape at several durations, cross-evaluate every
    tuned front on every duration, and record hypervolume plus the error of
    the most accurate transferred controller per cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base_spec = cfg.trajectory_spec(cfg.speed_trajectory)
    jts = {d: build_setpoints(cfg, base_spec.with_duration(d))
           for d in cfg.speed_durations}
    cells = []
    with evaluation_map(jobs) as emap:
        for seed in cfg.seeds():
            tuned = {}
            for d in cfg.speed_durations:
                ga_cfg = cfg.ga_config(rng_seed=seed)
                label = f"dur{d:g}s/seed{seed}"
                run_dir = out / "runs" / f"dur{d:g}s_seed{seed}"
                tuned[d] = (ga_cfg, _tune_once(cfg, [jts[d]], ga_cfg, label, emap,
                                               out_dir=run_dir, overwrite=overwrite))
            for d_tuned, (ga_cfg, result) in tuned.items():
                for d_eval in cfg.speed_durations:
                    front, points = reevaluate_front(cfg, result.front, ga_cfg,
                                                     jts[d_eval])
                    best_acc = min(p.f_acc for p in points)
                    cells.append((seed, d_tuned, d_eval, front, best_acc))
    ref = reference_point([front for *_, front, _ in cells])
    rows = [f"{seed},{_fmt(dt_)},{_fmt(de)},{_fmt(hypervolume_2d(front, ref))},{_fmt(acc)}"
            for seed, dt_, de, front, acc in cells]
    _write_summary(out / "summary.csv",
                   "seed,tuned_duration,evaluated_duration,hypervolume,best_accuracy_error",
                   rows, overwrite=overwrite)
    _write_run_manifest(out, "speed-study", cfg,
                        {"trajectory": cfg.speed_trajectory,
                         "durations": list(cfg.speed_durations), "seeds": cfg.seeds(),
                         "reference_point": list(ref)})
    return out / "summary.csv"


def run_emit_dataset(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                     overwrite: bool = False):
    """Produce the rollout dataset: per trajectory, execute every tuned
    front member and index the files. Existing valid files are reused, so
    regeneration with the same seeds is a byte-wise no-op."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index_rows = []
    n = cfg.model.n_links
    for spec in cfg.trajectories:
        tune_dir = out / "tunes" / spec.id
        front_path = tune_dir / "front.csv"
        if not front_path.exists():
            run_tune(cfg, spec.id, tune_dir, seed=cfg.base_seed, jobs=jobs,
                     overwrite=overwrite, write_rollouts=False)
        points, gains = read_front(front_path)
        members = list(zip(points, gains))
        if cfg.dataset_max_members is not None:
            members = members[:cfg.dataset_max_members]
        traj = build_cartesian(cfg, spec)
        jtraj = to_joint_setpoints(cfg.model, traj, cfg.elbow_branch)
        roll_dir = out / "rollouts" / spec.id
        roll_dir.mkdir(parents=True, exist_ok=True)
        for idx, (point, gain) in enumerate(members):
            if point.f_acc >= PENALTY:
                continue
            path = roll_dir / f"member_{idx:03d}.csv"
            reused = False
            if path.exists() and not overwrite:
                _, manifest = read_rollout(path)  # validates the checksum
                reused = True
            if not reused:
                log = simulate(cfg.model, jtraj, gain)
                manifest = manifest_for(cfg.model, log, objectives=point,
                                        trajectory_params=traj.params)
                write_rollout(log, manifest, path, overwrite=overwrite)
            rel = path.relative_to(out)
            index_rows.append(",".join(
                [spec.id, spec.kind, str(idx), _fmt(point.f_acc), _fmt(point.f_t)]
                + [_fmt(v) for v in gain.kp] + [_fmt(v) for v in gain.kd]
                + [str(rel), manifest.sha256]))
    header = ("trajectory,kind,member,f_acc,f_t,"
              + ",".join([f"kp_{j + 1}" for j in range(n)])
              + "," + ",".join([f"kd_{j + 1}" for j in range(n)])
              + ",file,sha256")
    _write_summary(out / "index.csv", header, index_rows, overwrite=True)
    _write_run_manifest(out, "emit-dataset", cfg,
                        {"seed": cfg.base_seed,
                         "trajectories": [s.id for s in cfg.trajectories],
                         "rollouts": len(index_rows)})
    return out / "index.csv"
