"""Experiment runner: config files, scenario bundles, CSV and checkpoint output.

A run is described by one YAML config with sections for the constellation,
the application, the request scenario, environment/training/routing knobs,
a mode, seeds, and an output directory.  Every run writes a manifest first
(atomically), then per-seed artifacts: training curves, checkpoints,
schedules, per-slot metrics, and feasibility reports, all as plain CSV so
any plotting tool can consume them.  Re-running an unchanged config
reproduces byte-identical CSVs (timing files excepted).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import yaml

from . import __version__
from .constellation import ConstellationGraph, build_walker_star
from .env import (
    CorePlacementEnv,
    DeploymentEnv,
    EnvConfig,
    ScheduleReport,
    evaluate_schedule,
    scheme_feasible,
)
from .game import MatrixGame, verify_game
from .learn import (
    CategoricalPolicy,
    TrainConfig,
    greedy_action,
    greedy_schedule,
    hpa_baseline,
    load_checkpoint,
    robust_hpa_baseline,
    save_checkpoint,
    train_msrarl,
    train_stage1,
    train_vanilla,
)
from .routing import RoutingConfig
from .workload import AppGraph, Microservice, RequestScenario

MODES = ("train-stage1", "train-stage2", "evaluate", "baseline", "game-check",
         "reproduce")
FIGURES = ("fig5", "fig6", "fig7", "fig8_9", "fig10", "timing")


class ConfigError(ValueError):
    """Config validation failure with per-key diagnostics."""

    def __init__(self, issues: list[str]):
        self.issues = issues
        super().__init__("invalid configuration:\n" + "\n".join(
            f"  - {i}" for i in issues))


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Validated run description plus the raw mapping it came from."""

    mode: str
    seeds: list[int]
    out_dir: Path
    raw: dict
    graph: ConstellationGraph | None = None
    app: AppGraph | None = None
    scenario: RequestScenario | None = None
    env_config: EnvConfig | None = None
    train_config: TrainConfig | None = None
    routing_config: RoutingConfig = field(default_factory=RoutingConfig)
    core_placement: object = "train"
    extras: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode()
        ).hexdigest()


def _get(data: dict, key: str, kind, issues: list[str], path: str, default=None,
         required: bool = False):
    if key not in data:
        if required:
            issues.append(f"{path}.{key}: missing required key")
        return default
    value = data[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        issues.append(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
        return default
    return value


def build_constellation(data: dict, issues: list[str],
                        path: str = "constellation") -> ConstellationGraph | None:
    planes = _get(data, "planes", int, issues, path, required=True)
    per_plane = _get(data, "per_plane", int, issues, path, required=True)
    altitude = _get(data, "altitude_km", float, issues, path, required=True)
    inclination = _get(data, "inclination_deg", float, issues, path, required=True)
    omega1 = _get(data, "angular_velocity_deg_per_ms", float, issues, path,
                  required=True)
    capacities = _get(data, "capacities", list, issues, path, required=True)
    speed = _get(data, "compute_speed_bits_per_ms", float, issues, path,
                 required=True)
    rate = _get(data, "link_rate_bits_per_ms", float, issues, path, required=True)
    overrides = _get(data, "link_rate_overrides", list, issues, path, default=[])
    if issues:
        return None
    try:
        return build_walker_star(
            planes=planes, per_plane=per_plane, altitude_km=altitude,
            inclination_deg=inclination, angular_velocity_deg_per_ms=omega1,
            capacities=tuple(float(c) for c in capacities),
            compute_speed=speed, link_rate=rate,
            link_rate_overrides={(int(u), int(v)): float(w)
                                 for u, v, w in overrides},
        )
    except (ValueError, TypeError) as err:
        issues.append(f"{path}: {err}")
        return None


def build_app(data: dict, issues: list[str], path: str = "app") -> AppGraph | None:
    entries = _get(data, "microservices", list, issues, path, required=True)
    edges = _get(data, "edges", list, issues, path, default=[])
    chains = _get(data, "chains", dict, issues, path, required=True)
    if issues:
        return None
    services = []
    for i, entry in enumerate(entries):
        try:
            services.append(Microservice(
                name=entry["name"],
                kind=entry["kind"],
                demands=tuple(float(d) for d in entry["demands"]),
                compute_bits=float(entry["compute_bits"]),
                output_bits=float(entry["output_bits"]),
                parallel_capacity=int(entry["parallel_capacity"]),
                price_deploy=float(entry["price_deploy"]),
                price_keep=float(entry["price_keep"]),
                price_parallel=float(entry["price_parallel"]),
            ))
        except (KeyError, ValueError, TypeError) as err:
            issues.append(f"{path}.microservices[{i}]: {err}")
    if issues:
        return None
    try:
        return AppGraph(services, [tuple(e) for e in edges],
                                  {k: list(v) for k, v in chains.items()})
    except ValueError as err:
        issues.append(f"{path}: {err}")
        return None


def build_scenario(data: dict, regions: int, issues: list[str],
                   path: str = "scenario") -> RequestScenario | None:
    slots = _get(data, "slots", int, issues, path, required=True)
    totals = _get(data, "totals", dict, issues, path)
    matrices = _get(data, "matrices", dict, issues, path)
    if totals is None and matrices is None:
        issues.append(f"{path}: either totals or matrices is required")
    if issues:
        return None
    try:
        if totals is not None:
            scenario = RequestScenario.from_totals(
                {c: [int(x) for x in v] for c, v in totals.items()}, regions)
        else:
            scenario = RequestScenario(
                slots=slots, regions=regions,
                chain_tasks={c: np.asarray(v, dtype=np.int64)
                             for c, v in matrices.items()},
            )
        if scenario.slots != slots:
            issues.append(f"{path}.slots: declared {slots}, data has {scenario.slots}")
            return None
        return scenario
    except ValueError as err:
        issues.append(f"{path}: {err}")
        return None


def build_env_config(data: dict, slots: int, issues: list[str],
                     path: str = "env") -> EnvConfig | None:
    try:
        return EnvConfig(
            slots=slots,
            qos_bound_ms=float(data["qos_bound_ms"]),
            phi=int(data.get("phi", 0)),
            alpha=int(data.get("alpha", 3)),
            step_violation_reward=float(data.get("step_violation_reward", -5.0)),
            step_success_reward=float(data.get("step_success_reward", 1.0)),
            slot_cost_weight=float(data.get("slot_cost_weight", -0.01)),
            total_cost_weight=float(data.get("total_cost_weight", -0.01)),
            qos_violation_weight=float(data.get("qos_violation_weight", -10.0)),
            place_violation_reward=float(data.get("place_violation_reward", -5.0)),
            place_success_reward=float(data.get("place_success_reward", 1.0)),
            latency_weight=float(data.get("latency_weight", 0.01)),
            stage1_max_steps=int(data.get("stage1_max_steps", 0)),
            realization=str(data.get("realization", "adversary")),
        )
    except (KeyError, ValueError, TypeError) as err:
        issues.append(f"{path}: {err}")
        return None


def build_train_config(data: dict, seed: int, issues: list[str],
                       path: str = "train") -> TrainConfig | None:
    try:
        return TrainConfig(
            episodes=int(data.get("episodes", 150)),
            epoch_size=int(data.get("epoch_size", 4)),
            rollouts_per_epoch=int(data.get("rollouts_per_epoch", 4)),
            clip_ratio=float(data.get("clip_ratio", 0.2)),
            discount=float(data.get("discount", 0.99)),
            advantage_smoothing=float(data.get("advantage_smoothing", 0.95)),
            learning_rate=float(data.get("learning_rate", 3e-4)),
            hidden_sizes=tuple(int(h) for h in data.get("hidden_sizes", (64, 64))),
            update_passes=int(data.get("update_passes", 4)),
            entropy_coef=float(data.get("entropy_coef", 0.01)),
            value_coef=float(data.get("value_coef", 0.5)),
            seed=seed,
        )
    except (ValueError, TypeError) as err:
        issues.append(f"{path}: {err}")
        return None


def build_routing_config(data: dict, issues: list[str],
                         path: str = "routing") -> RoutingConfig:
    try:
        return RoutingConfig(
            overload_punishment=float(data.get("overload_punishment", 1e6)),
            exact_search_cap=int(data.get("exact_search_cap", 4096)),
        )
    except (ValueError, TypeError) as err:
        issues.append(f"{path}: {err}")
        return RoutingConfig()


def load_experiment_config(source: str | Path | dict,
                           overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a config mapping or YAML file path."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise ConfigError([f"config file not found: {path}"])
        raw = yaml.safe_load(path.read_text())
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    raw = {**raw, **(overrides or {})}

    issues: list[str] = []
    mode = raw.get("mode")
    if mode not in MODES:
        issues.append(f"mode: must be one of {', '.join(MODES)} (got {mode!r})")
    seeds = raw.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) for s in seeds)):
        issues.append("seeds: must be a non-empty list of integers")
        seeds = [0]
    out_dir = raw.get("out_dir")
    if not isinstance(out_dir, str) or not out_dir:
        issues.append("out_dir: must be a non-empty path string")
        out_dir = "runs/unnamed"
    if issues:
        raise ConfigError(issues)

    config = ExperimentConfig(mode=mode, seeds=list(seeds), out_dir=Path(out_dir),
                              raw=raw)
    needs_world = mode in ("train-stage1", "train-stage2", "evaluate", "baseline")
    if needs_world:
        for section in ("constellation", "app", "env"):
            if section not in raw:
                issues.append(f"{section}: section required for mode {mode}")
        if mode != "train-stage1" and "scenario" not in raw:
            issues.append(f"scenario: section required for mode {mode}")
        if issues:
            raise ConfigError(issues)
        config.graph = build_constellation(raw["constellation"], issues)
        config.app = build_app(raw["app"], issues)
        if issues:
            raise ConfigError(issues)
        slots = 1
        if "scenario" in raw:
            config.scenario = build_scenario(raw["scenario"], config.graph.size,
                                             issues)
            if config.scenario is not None:
                slots = config.scenario.slots
        config.env_config = build_env_config(raw["env"], slots, issues)
        config.train_config = build_train_config(raw.get("train", {}), seeds[0],
                                                 issues)
        config.routing_config = build_routing_config(raw.get("routing", {}), issues)
        config.core_placement = raw.get("core_placement", "train")
    if mode == "game-check":
        config.extras["game_check"] = raw.get("game_check", {})
    if mode == "evaluate":
        if "checkpoints" not in raw:
            issues.append("checkpoints: section required for mode evaluate")
        else:
            config.extras["checkpoints"] = raw["checkpoints"]
    if mode == "reproduce":
        figures = raw.get("figures", list(FIGURES))
        bad = [f for f in figures if f not in FIGURES]
        if bad:
            issues.append(f"figures: unknown entries {bad}")
        config.extras["figures"] = figures
        config.extras["reproduce"] = raw.get("reproduce", {})
    if issues:
        raise ConfigError(issues)
    return config


# ---------------------------------------------------------------------------
# Manifest and CSV helpers
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Run metadata written atomically before any results."""

    config_hash: str
    version: str
    mode: str
    seeds: list[int]
    outputs: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    hardware: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        payload = {
            "config_hash": self.config_hash,
            "version": self.version,
            "mode": self.mode,
            "seeds": self.seeds,
            "outputs": sorted(self.outputs),
            "timings": self.timings,
            "hardware": self.hardware,
        }
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True))
        os.replace(tmp, path)
        return path


def _hardware_info() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "torch": torch.__version__,
    }


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _write_schedule_outputs(out: Path, app: AppGraph, light: np.ndarray,
                            report: ScheduleReport,
                            manifest: RunManifest) -> None:
    rows = []
    for t in range(light.shape[0]):
        for m_idx, svc in enumerate(app.light):
            for d in range(light.shape[2]):
                rows.append([t, svc.name, d, int(light[t, m_idx, d])])
    write_csv(out / "deploy_counts.csv",
              ["slot", "microservice", "satellite", "count"], rows)
    write_csv(out / "processed.csv",
              ["slot", "realized", "processed", "unserved", "qos_violations",
               "deployed"],
              [[s.slot, s.realized_total, s.processed, s.unserved,
                s.qos_violations, s.deployed] for s in report.slots])
    write_csv(out / "costs.csv",
              ["slot", "cost_deploy", "cost_keep", "cost_parallel"],
              [[s.slot, s.cost_deploy, s.cost_keep, s.cost_parallel]
               for s in report.slots])
    write_csv(out / "latencies.csv", ["slot", "task", "latency_ms"],
              [[s.slot, z, lat] for s in report.slots
               for z, lat in enumerate(s.latencies)])
    write_csv(out / "feasibility.csv", ["slot", "feasible"],
              [[s.slot, int(s.feasible)] for s in report.slots])
    manifest.outputs.extend(
        str(out / name) for name in
        ("deploy_counts.csv", "processed.csv", "costs.csv", "latencies.csv",
         "feasibility.csv"))


def _write_curves(path: Path, curves: list[dict], manifest: RunManifest) -> None:
    write_csv(path,
              ["iteration", "phase", "epoch", "mean_return", "loss",
               "policy_loss", "value_loss", "entropy", "clip_fraction"],
              [[c.get("iteration", 0), c.get("phase", "protagonist"),
                c.get("epoch", 0), c["mean_return"], c["loss"],
                c["policy_loss"], c["value_loss"], c["entropy"],
                c["clip_fraction"]] for c in curves])
    manifest.outputs.append(str(path))


# ---------------------------------------------------------------------------
# Shared run pieces
# ---------------------------------------------------------------------------


def resolve_core_placement(config: ExperimentConfig, seed: int) -> np.ndarray:
    """Core scheme from config: explicit satellite list/matrix or stage-1 training."""
    app, graph = config.app, config.graph
    spec = config.core_placement
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=np.int64)
        if arr.ndim == 1:
            if arr.size != app.num_core:
                raise ConfigError(
                    [f"core_placement: need {app.num_core} satellite ids"])
            core = np.zeros((app.num_core, graph.size), dtype=np.int64)
            for i, sat in enumerate(arr):
                core[i, int(sat)] = 1
            return core
        if arr.shape != (app.num_core, graph.size):
            raise ConfigError(
                [f"core_placement: matrix must be {app.num_core}x{graph.size}"])
        return arr
    if spec == "train":
        env = CorePlacementEnv(graph, app, config.env_config)
        train = TrainConfig(
            episodes=min(config.train_config.episodes, 60),
            epoch_size=1, rollouts_per_epoch=1,
            hidden_sizes=config.train_config.hidden_sizes,
            learning_rate=config.train_config.learning_rate,
            seed=seed,
        )
        return train_stage1(env, train).placement
    raise ConfigError(["core_placement: must be 'train', a satellite list, or a matrix"])


def _stage2_env(config: ExperimentConfig, core: np.ndarray, realization: str,
                phi: int | None = None) -> DeploymentEnv:
    fields = {**config.env_config.__dict__, "realization": realization}
    if phi is not None:
        fields["phi"] = phi
    return DeploymentEnv(config.graph, config.app, config.scenario, core,
                         EnvConfig(**fields), config.routing_config)


def _train_config_for_seed(config: ExperimentConfig, seed: int) -> TrainConfig:
    return TrainConfig(**{**config.train_config.__dict__, "seed": seed})


def _emit_policy_evaluations(config: ExperimentConfig, core: np.ndarray,
                             policy: CategoricalPolicy, out: Path,
                             manifest: RunManifest,
                             modes: tuple[str, ...] = ("nominal", "worst_case",
                                                       "low_case"),
                             phi: int | None = None,
                             prefix: str = "eval",
                             ) -> dict[str, ScheduleReport]:
    reports = {}
    for mode in modes:
        env = _stage2_env(config, core, mode, phi=phi)
        light, realized = greedy_schedule(env, policy)
        report = evaluate_schedule(config.graph, config.app, core, light, realized,
                                   config.env_config.qos_bound_ms,
                                   config.routing_config)
        _write_schedule_outputs(out / f"{prefix}_{mode}", config.app, light,
                                report, manifest)
        reports[mode] = report
    return reports


# ---------------------------------------------------------------------------
# Mode runners
# ---------------------------------------------------------------------------


def _run_train_stage1(config: ExperimentConfig, manifest: RunManifest) -> None:
    for seed in config.seeds:
        out = config.out_dir / f"stage1_seed{seed}"
        out.mkdir(parents=True, exist_ok=True)
        env = CorePlacementEnv(config.graph, config.app, config.env_config)
        result = train_stage1(env, _train_config_for_seed(config, seed))
        write_csv(out / "placement.csv", ["microservice", "satellite"],
                  [[svc.name, int(np.flatnonzero(result.placement[i])[0])]
                   for i, svc in enumerate(config.app.core)])
        _write_curves(out / "curves.csv", result.curve, manifest)
        save_checkpoint(out / "stage1.npz", result.policy, seed=seed,
                        iteration=len(result.curve),
                        config_hash=config.config_hash)
        manifest.outputs.extend([str(out / "placement.csv"),
                                 str(out / "stage1.npz")])


def _run_train_stage2(config: ExperimentConfig, manifest: RunManifest) -> None:
    for seed in config.seeds:
        out = config.out_dir / f"stage2_seed{seed}"
        out.mkdir(parents=True, exist_ok=True)
        core = resolve_core_placement(config, seed)
        env = _stage2_env(config, core, "adversary")
        result = train_msrarl(env, _train_config_for_seed(config, seed))
        _write_curves(out / "curves.csv", result.curves, manifest)
        save_checkpoint(out / "protagonist.npz", result.protagonist, seed=seed,
                        iteration=config.train_config.episodes,
                        config_hash=config.config_hash)
        save_checkpoint(out / "adversary.npz", result.adversary, seed=seed,
                        iteration=config.train_config.episodes,
                        config_hash=config.config_hash)
        manifest.outputs.extend([str(out / "protagonist.npz"),
                                 str(out / "adversary.npz")])
        _emit_policy_evaluations(config, core, result.protagonist, out, manifest)


def _run_evaluate(config: ExperimentConfig, manifest: RunManifest) -> None:
    checkpoints = config.extras["checkpoints"]
    policy, meta = load_checkpoint(checkpoints["protagonist"])
    seed = config.seeds[0]
    core = resolve_core_placement(config, seed)
    out = config.out_dir / "evaluate"
    out.mkdir(parents=True, exist_ok=True)
    _emit_policy_evaluations(config, core, policy, out, manifest)


def _run_baseline(config: ExperimentConfig, manifest: RunManifest) -> None:
    seed = config.seeds[0]
    core = resolve_core_placement(config, seed)
    env = _stage2_env(config, core, "nominal")
    phi = config.env_config.phi
    from .env import realize_scenario

    for name, light in (
        ("hpa", hpa_baseline(config.scenario, env)),
        ("robust_hpa", robust_hpa_baseline(config.scenario, env, phi)),
    ):
        realized = realize_scenario(config.scenario, config.env_config.slots,
                                    "worst_case", phi)
        report = evaluate_schedule(config.graph, config.app, core, light, realized,
                                   config.env_config.qos_bound_ms,
                                   config.routing_config)
        _write_schedule_outputs(config.out_dir / name, config.app, light, report,
                                manifest)


def _run_game_check(config: ExperimentConfig, manifest: RunManifest) -> None:
    settings = config.extras.get("game_check", {})
    count = int(settings.get("games", 100))
    max_size = int(settings.get("max_size", 8))
    tol = float(settings.get("tol", 1e-6))
    rng = np.random.default_rng(int(settings.get("seed", 0)))
    rows = []
    failures = 0
    for gid in range(count):
        m = int(rng.integers(1, max_size + 1))
        n = int(rng.integers(1, max_size + 1))
        payoff = rng.uniform(-10.0, 10.0, size=(m, n))
        report = verify_game(MatrixGame(payoff), tol=tol)
        ok = report.weak_duality and report.minimax and report.saddle
        failures += 0 if ok else 1
        rows.append([gid, m, n, report.v1, report.v2, report.gap,
                     int(report.weak_duality), int(report.minimax),
                     int(report.saddle)])
    out = config.out_dir / "game_report.csv"
    write_csv(out, ["game", "rows", "cols", "v1", "v2", "gap", "weak_duality",
                    "minimax", "saddle"], rows)
    manifest.outputs.append(str(out))
    if failures:
        raise RuntimeError(f"{failures} of {count} games failed verification")


@dataclass
class TimingStats:
    mean_ms: float
    p95_ms: float
    samples: int


def measure_decision_latency(policy: CategoricalPolicy, env: DeploymentEnv,
                             repetitions: int = 100) -> TimingStats:
    """Wall-clock per-slot inference: one greedy decode per light microservice."""
    state = env.reset()
    samples = []
    for _ in range(max(1, repetitions)):
        start = time.perf_counter()
        for _ in range(env.app.num_light):
            greedy_action(policy, state)
        samples.append((time.perf_counter() - start) * 1000.0)
    return TimingStats(
        mean_ms=float(np.mean(samples)),
        p95_ms=float(np.percentile(samples, 95)),
        samples=len(samples),
    )


# ---------------------------------------------------------------------------
# Scenario reproduction bundle
# ---------------------------------------------------------------------------

SURGE_TOTALS = [55, 65, 27, 87, 76]
CALM_TOTALS = [43, 54, 63, 54]
DEFAULT_CAPACITIES = [4.0, 4.0, 4.0, 200.0]

LIGHT_NAMES = ["prepare", "encode", "project", "filter"]


def bundle_app_spec(num_light: int = 2) -> dict:
    """Application fixture: a light prefix chain feeding two core modules."""
    lights = LIGHT_NAMES[:num_light]
    services = [
        {
            "name": name, "kind": "light",
            "demands": [0.25, 0.25, 0.0, 5.0],
            "compute_bits": 100.0, "output_bits": 200.0,
            "parallel_capacity": 10,
            "price_deploy": 2.0, "price_keep": 1.0, "price_parallel": 0.5,
        }
        for name in lights
    ]
    services.append({
        "name": "backbone", "kind": "core",
        "demands": [1.0, 1.0, 1.0, 50.0],
        "compute_bits": 500.0, "output_bits": 400.0,
        "parallel_capacity": 1000,
        "price_deploy": 10.0, "price_keep": 2.0, "price_parallel": 0.0,
    })
    services.append({
        "name": "deliver", "kind": "core",
        "demands": [0.5, 0.5, 0.0, 20.0],
        "compute_bits": 200.0, "output_bits": 100.0,
        "parallel_capacity": 1000,
        "price_deploy": 5.0, "price_keep": 1.0, "price_parallel": 0.0,
    })
    order = lights + ["backbone", "deliver"]
    edges = [[a, b] for a, b in zip(order, order[1:])]
    return {"microservices": services, "edges": edges, "chains": {"main": order}}


def bundle_constellation_spec(satellites: int = 6) -> dict:
    layouts = {6: (2, 3), 12: (3, 4), 18: (3, 6)}
    if satellites not in layouts:
        raise ValueError(f"no bundled layout for {satellites} satellites")
    planes, per_plane = layouts[satellites]
    return {
        "planes": planes, "per_plane": per_plane,
        "altitude_km": 780.0, "inclination_deg": 86.4,
        "angular_velocity_deg_per_ms": 6.0e-5,
        "capacities": list(DEFAULT_CAPACITIES),
        "compute_speed_bits_per_ms": 1000.0,
        "link_rate_bits_per_ms": 1000.0,
    }


def bundle_env_spec(phi: int, realization: str = "adversary") -> dict:
    # Cost weights are an order stronger than the library defaults so the
    # desk-scale policies track demand levels instead of parking at a
    # comfortable over-provision.
    return {
        "qos_bound_ms": 200.0,
        "phi": phi,
        "alpha": 3,
        "slot_cost_weight": -0.1,
        "total_cost_weight": -0.1,
        "realization": realization,
    }


def bundle_train_spec() -> dict:
    return {
        "episodes": 30,
        "epoch_size": 3,
        "rollouts_per_epoch": 4,
        "update_passes": 4,
        "learning_rate": 3e-3,
        "hidden_sizes": [64, 64],
        "entropy_coef": 0.01,
    }


def reproduce_scenarios() -> dict[str, dict]:
    """Bundled experiment fixtures keyed by figure id."""
    base = {
        "constellation": bundle_constellation_spec(6),
        "app": bundle_app_spec(2),
        "core_placement": [0, 1],
        "train": bundle_train_spec(),
        "routing": {"overload_punishment": 1e6, "exact_search_cap": 4096},
    }
    surge = {"slots": 5, "totals": {"main": list(SURGE_TOTALS)}}
    calm = {"slots": 4, "totals": {"main": list(CALM_TOTALS)}}
    return {
        "fig5": {**base, "scenario": surge, "env": bundle_env_spec(1)},
        "fig6": {**base, "scenario": surge, "env": bundle_env_spec(2)},
        "fig7": {**base, "scenario": calm, "env": bundle_env_spec(2)},
        "fig8_9": {**base, "scenario": surge, "widths": [1, 2, 4]},
        "fig10": {**base, "scenario": surge, "widths": [1, 4]},
        "timing": {
            "satellites": [6, 12, 18],
            "microservices": [2, 4],
            "repetitions": 50,
        },
    }


def _reproduce_training_run(config: ExperimentConfig, kind: str, totals_key: str,
                            train_phi: int, seed: int, manifest: RunManifest,
                            cache: dict) -> dict:
    """Train (or fetch) one policy; evaluation happens per figure width."""
    key = (kind, totals_key, train_phi, seed)
    if key in cache:
        return cache[key]
    scenario_spec = (
        {"slots": 5, "totals": {"main": list(SURGE_TOTALS)}}
        if totals_key == "surge" else {"slots": 4, "totals": {"main": list(CALM_TOTALS)}}
    )
    sub_raw = {
        "mode": "train-stage2",
        "seeds": [seed],
        "out_dir": str(config.out_dir / "runs"
                       / f"{totals_key}_{kind}_w{train_phi}_seed{seed}"),
        "constellation": bundle_constellation_spec(6),
        "app": bundle_app_spec(2),
        "core_placement": [0, 1],
        "scenario": scenario_spec,
        "env": bundle_env_spec(train_phi),
        "train": {**bundle_train_spec(), **config.extras.get("reproduce", {})
                  .get("train", {})},
        "routing": {"overload_punishment": 1e6, "exact_search_cap": 4096},
    }
    sub = load_experiment_config(sub_raw)
    out = Path(sub_raw["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    core = resolve_core_placement(sub, seed)
    train_config = _train_config_for_seed(sub, seed)
    if kind == "msrarl":
        env = _stage2_env(sub, core, "adversary")
        result = train_msrarl(env, train_config)
        policy = result.protagonist
        curves = result.curves
    else:
        env = _stage2_env(sub, core, "nominal")
        result = train_vanilla(env, train_config)
        policy = result.policy
        curves = result.curves
    _write_curves(out / "curves.csv", curves, manifest)
    save_checkpoint(out / "protagonist.npz", policy, seed=seed,
                    iteration=train_config.episodes, config_hash=sub.config_hash)
    manifest.outputs.append(str(out / "protagonist.npz"))
    entry = {"policy": policy, "core": core, "config": sub, "out": out,
             "evals": {}}
    cache[key] = entry
    return entry


def _eval_entry(entry: dict, eval_phi: int, manifest: RunManifest) -> dict:
    """Evaluate one trained run under the corners of a given box width."""
    if eval_phi not in entry["evals"]:
        entry["evals"][eval_phi] = _emit_policy_evaluations(
            entry["config"], entry["core"], entry["policy"], entry["out"],
            manifest, phi=eval_phi, prefix=f"eval_w{eval_phi}",
        )
    return entry["evals"][eval_phi]


def _run_reproduce(config: ExperimentConfig, manifest: RunManifest) -> None:
    figures = config.extras.get("figures", list(FIGURES))
    seeds = config.seeds
    cache: dict = {}

    def runs(kind, totals_key, train_phi):
        return [_reproduce_training_run(config, kind, totals_key, train_phi,
                                        seed, manifest, cache)
                for seed in seeds]

    def reports(entries, eval_phi, mode):
        return [_eval_entry(entry, eval_phi, manifest)[mode]
                for entry in entries]

    if "fig6" in figures:
        msrarl = reports(runs("msrarl", "surge", 2), 2, "worst_case")
        vanilla = reports(runs("vanilla", "surge", 0), 2, "worst_case")
        rows = []
        for t in range(5):
            rows.append([
                t,
                msrarl[0].slots[t].realized_total,
                float(np.mean([r.slots[t].processed for r in msrarl])),
                float(np.mean([r.slots[t].processed for r in vanilla])),
            ])
        out = config.out_dir / "fig6" / "summary.csv"
        write_csv(out, ["slot", "realized_worst_case", "msrarl_mean_processed",
                        "vanilla_mean_processed"], rows)
        manifest.outputs.append(str(out))

    if "fig7" in figures:
        # The calm scenario is the "fewer instances needed" situation: both
        # policies face the low box corner, where adversarial training has
        # actually visited the lull states.
        msrarl = reports(runs("msrarl", "calm", 2), 2, "low_case")
        vanilla = reports(runs("vanilla", "calm", 0), 2, "low_case")
        rows = []
        for t in range(4):
            rows.append([
                t,
                float(np.mean([r.slots[t].deployed for r in msrarl])),
                float(np.mean([r.slots[t].deployed for r in vanilla])),
            ])
        out = config.out_dir / "fig7" / "summary.csv"
        write_csv(out, ["slot", "msrarl_mean_deployed", "vanilla_mean_deployed"],
                  rows)
        manifest.outputs.append(str(out))

    width_runs: dict[int, list] = {}
    if "fig5" in figures or "fig8_9" in figures or "fig10" in figures:
        width_runs[1] = runs("msrarl", "surge", 1)
    if "fig8_9" in figures:
        width_runs[2] = runs("msrarl", "surge", 2)
    if "fig8_9" in figures or "fig10" in figures:
        width_runs[4] = runs("msrarl", "surge", 4)

    if "fig5" in figures:
        entry = width_runs[1][0]
        env = _stage2_env(entry["config"], entry["core"], "nominal")
        hpa = hpa_baseline(entry["config"].scenario, env)
        robust = robust_hpa_baseline(entry["config"].scenario, env, 1)
        from .env import realize_scenario

        realized = realize_scenario(entry["config"].scenario, 5, "worst_case", 1)
        hpa_report = evaluate_schedule(entry["config"].graph, entry["config"].app,
                                       entry["core"], hpa, realized, 200.0,
                                       entry["config"].routing_config)
        robust_report = evaluate_schedule(entry["config"].graph,
                                          entry["config"].app, entry["core"],
                                          robust, realized, 200.0,
                                          entry["config"].routing_config)
        _write_schedule_outputs(config.out_dir / "fig5" / "hpa",
                                entry["config"].app, hpa, hpa_report, manifest)
        _write_schedule_outputs(config.out_dir / "fig5" / "robust_hpa",
                                entry["config"].app, robust, robust_report,
                                manifest)
        msrarl_reports = reports(width_runs[1], 1, "worst_case")
        rows = [
            ["msrarl_mean", float(np.mean([r.total_deployed
                                           for r in msrarl_reports]))],
            ["hpa", hpa_report.total_deployed],
            ["robust_hpa", robust_report.total_deployed],
        ]
        out = config.out_dir / "fig5" / "summary.csv"
        write_csv(out, ["algorithm", "total_deployed"], rows)
        manifest.outputs.append(str(out))

    if "fig8_9" in figures:
        rows = []
        for width in (1, 2, 4):
            width_reports = reports(width_runs[width], width, "worst_case")
            rows.append([
                width,
                float(np.mean([sum(r.processed_per_slot)
                               for r in width_reports])),
                float(np.mean([r.total_deployed for r in width_reports])),
            ])
        out = config.out_dir / "fig8_9" / "summary.csv"
        write_csv(out, ["width", "mean_processed", "mean_deployed"], rows)
        manifest.outputs.append(str(out))

    if "fig10" in figures:
        # Latency of each regime under its own surge corner; the uncertainty
        # oblivious baseline faces the widest one.
        vanilla = reports(runs("vanilla", "surge", 0), 4, "worst_case")
        w1 = reports(width_runs[1], 1, "worst_case")
        w4 = reports(width_runs[4], 4, "worst_case")

        def mean_latency(slot_reports, t):
            values = []
            for report in slot_reports:
                finite = [lat for lat in report.slots[t].latencies
                          if np.isfinite(lat)]
                if finite:
                    values.append(float(np.mean(finite)))
            return float(np.mean(values)) if values else 0.0

        rows = [[t, mean_latency(vanilla, t), mean_latency(w1, t),
                 mean_latency(w4, t)] for t in range(5)]
        out = config.out_dir / "fig10" / "summary.csv"
        write_csv(out, ["slot", "vanilla_mean_latency_ms", "w1_mean_latency_ms",
                        "w4_mean_latency_ms"], rows)
        manifest.outputs.append(str(out))

    if "timing" in figures:
        spec = reproduce_scenarios()["timing"]
        rows = []
        for sats in spec["satellites"]:
            for num_light in spec["microservices"]:
                sub_raw = {
                    "mode": "train-stage2", "seeds": [seeds[0]],
                    "out_dir": str(config.out_dir / "timing"),
                    "constellation": bundle_constellation_spec(sats),
                    "app": bundle_app_spec(num_light),
                    "core_placement": [0, 1],
                    "scenario": {"slots": 5,
                                 "totals": {"main": list(SURGE_TOTALS)}},
                    "env": bundle_env_spec(2),
                    "train": bundle_train_spec(),
                }
                sub = load_experiment_config(sub_raw)
                core = resolve_core_placement(sub, seeds[0])
                env = _stage2_env(sub, core, "worst_case")
                policy = CategoricalPolicy(
                    input_dim=env.protagonist_state_dim,
                    num_heads=env.regions,
                    classes_per_head=env.config.alpha + 1,
                    hidden_sizes=tuple(bundle_train_spec()["hidden_sizes"]),
                    seed=seeds[0],
                )
                stats = measure_decision_latency(policy, env,
                                                 spec["repetitions"])
                rows.append([sats, num_light, stats.mean_ms, stats.p95_ms,
                             stats.samples])
        out = config.out_dir / "timing" / "timing.csv"
        write_csv(out, ["satellites", "microservices", "mean_ms", "p95_ms",
                        "repetitions"], rows)
        manifest.outputs.append(str(out))


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def run(config: ExperimentConfig) -> int:
    """Dispatch one experiment; returns a process exit status."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config_hash=config.config_hash,
        version=__version__,
        mode=config.mode,
        seeds=config.seeds,
        hardware=_hardware_info(),
    )
    manifest.write(config.out_dir)
    started = time.perf_counter()
    runners = {
        "train-stage1": _run_train_stage1,
        "train-stage2": _run_train_stage2,
        "evaluate": _run_evaluate,
        "baseline": _run_baseline,
        "game-check": _run_game_check,
        "reproduce": _run_reproduce,
    }
    runners[config.mode](config, manifest)
    manifest.timings["total_s"] = time.perf_counter() - started
    manifest.write(config.out_dir)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="satdeploy",
        description="Robust microservice deployment experiments on LEO grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="execute one experiment config")
    run_parser.add_argument("--config", required=True, help="YAML config path")
    run_parser.add_argument("--mode", choices=MODES, help="override config mode")
    run_parser.add_argument("--seed", type=int, help="override seeds with one seed")
    run_parser.add_argument("--out", help="override output directory")
    args = parser.parse_args(argv)

    overrides: dict = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.out:
        overrides["out_dir"] = args.out
    try:
        config = load_experiment_config(args.config, overrides)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return 2
    try:
        return run(config)
    except Exception as err:  # surface context, non-zero exit
        print(f"run failed: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
