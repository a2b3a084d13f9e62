"""Training driver: population sampling, parallel lifetime evaluation, logging.

All randomness derives from the master seed through counter-based splits
(master -> generation -> candidate -> environment), so results are identical
for any worker count and candidates can be evaluated in any order.  The
generation CSV contains only deterministic columns; wall-clock timings go to
a sidecar file.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .cmaes import CmaEs
from .envs import SPECS, EnvSpec
from .fitness import LifetimeConfig, aggregate_fitness, lifetime_score, normalize_score
from .genome import (ArchConfig, ConfigurationError, describe_parameter_count,
                     save_genome, unflatten)
from .variants import (VariantSpec, apply_variant, save_symla, symla_run_lifetime,
                       symla_unflatten, variant_parameter_count)

GENERATION_CSV_COLUMNS = (
    "generation", "pop_mean_fitness", "pop_best_fitness",
    "mean_norm_cartpole", "mean_norm_acrobot", "mean_norm_mountaincar", "sigma",
)

# spawn-key stream tags for the counter-based seed split
_SAMPLER_STREAM = 0
_EVAL_STREAM = 1


@dataclass
class RunConfig:
    """Everything one training run depends on."""

    variant: VariantSpec = field(default_factory=VariantSpec)
    environments: tuple[str, ...] = ("cartpole", "acrobot", "mountaincar")
    generations: int = 300
    population: int = 128
    lifetime: LifetimeConfig = field(default_factory=LifetimeConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    master_seed: int = 0
    output_dir: Path = Path("runs/run")
    checkpoint_every: int = 25
    sigma0: float = 0.1
    workers: Optional[int] = None
    eval_repeats: int = 1
    common_random_numbers: bool = False
    early_stop_mean_norm: Optional[float] = None

    def __post_init__(self) -> None:
        self.environments = tuple(self.environments)
        self.output_dir = Path(self.output_dir)
        if self.population < 4:
            raise ConfigurationError("population must be at least 4")
        if self.generations < 0:
            raise ConfigurationError("generations must be non-negative")
        if not self.environments:
            raise ConfigurationError("need at least one environment")
        for name in self.environments:
            if name not in SPECS:
                raise ConfigurationError(f"unknown environment {name!r}")
        if self.checkpoint_every < 1:
            raise ConfigurationError("checkpoint_every must be >= 1")
        if self.eval_repeats < 1:
            raise ConfigurationError("eval_repeats must be >= 1")
        min_neurons = max(SPECS[n].obs_dim + SPECS[n].n_actions for n in self.environments)
        if self.arch.n_total_neurons <= min_neurons:
            raise ConfigurationError(
                f"n_total_neurons={self.arch.n_total_neurons} too small for "
                f"{min_neurons} I/O neurons"
            )

    def to_dict(self) -> dict:
        return {
            "variant": {"kind": self.variant.kind,
                        "fixed_adjacency_seed": self.variant.fixed_adjacency_seed},
            "environments": list(self.environments),
            "generations": self.generations,
            "population": self.population,
            "lifetime": {"n_episodes": self.lifetime.n_episodes},
            "arch": self.arch.to_dict(),
            "master_seed": self.master_seed,
            "output_dir": str(self.output_dir),
            "checkpoint_every": self.checkpoint_every,
            "sigma0": self.sigma0,
            "eval_repeats": self.eval_repeats,
            "common_random_numbers": self.common_random_numbers,
            "early_stop_mean_norm": self.early_stop_mean_norm,
        }


# -- evaluation workers --------------------------------------------------------

_CTX: dict = {}


def _init_worker(ctx: dict) -> None:
    global _CTX
    _CTX = ctx


def _lifetime_seed(master_seed: int, generation: int, candidate: int,
                   env_idx: int, repeat: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=master_seed,
        spawn_key=(_EVAL_STREAM, generation, candidate, env_idx, repeat),
    )


def _evaluate_vector(task: tuple) -> tuple[float, list[float]]:
    """Fitness of one flat parameter vector: product of normalized scores."""
    generation, candidate, vector = task
    ctx = _CTX
    arch: ArchConfig = ctx["arch"]
    lifetime_cfg: LifetimeConfig = ctx["lifetime"]
    seed_candidate = 0 if ctx["common_random_numbers"] else candidate
    normalized = []
    for env_idx, name in enumerate(ctx["environments"]):
        spec: EnvSpec = SPECS[name]
        repeats = []
        for rep in range(ctx["eval_repeats"]):
            seed = _lifetime_seed(ctx["master_seed"], generation, seed_candidate,
                                  env_idx, rep)
            if ctx["model"] == "symla":
                params = symla_unflatten(vector, arch)
                scores, _ = symla_run_lifetime(params, spec, lifetime_cfg, seed)
                score = float(np.dot(lifetime_cfg.episode_weights, scores))
            else:
                genome = unflatten(vector, arch)
                adjacency = ctx["adjacency_by_env"].get(name)
                score = lifetime_score(genome, spec, lifetime_cfg, seed,
                                       adjacency=adjacency)
            repeats.append(score)
        normalized.append(normalize_score(float(np.mean(repeats)), spec))
    return aggregate_fitness(normalized), normalized


def _build_context(cfg: RunConfig) -> dict:
    from .protocols import fixed_adjacency_for_env

    arch = apply_variant(cfg.variant, cfg.arch)
    adjacency_by_env: dict[str, np.ndarray] = {}
    if cfg.variant.kind == "fixed_adjacency":
        for name in cfg.environments:
            adjacency_by_env[name] = fixed_adjacency_for_env(
                cfg.variant.fixed_adjacency_seed, SPECS[name], arch)
    return {
        "arch": arch,
        "lifetime": cfg.lifetime,
        "environments": cfg.environments,
        "master_seed": cfg.master_seed,
        "eval_repeats": cfg.eval_repeats,
        "common_random_numbers": cfg.common_random_numbers,
        "model": "symla" if cfg.variant.kind == "symla" else "sfnn",
        "adjacency_by_env": adjacency_by_env,
    }


# -- output helpers --------------------------------------------------------------

def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _format_row(values) -> str:
    return ",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v))
                    for v in values)


def _save_vector(path: Path, vector: np.ndarray, cfg: RunConfig, arch: ArchConfig) -> None:
    if cfg.variant.kind == "symla":
        save_symla(symla_unflatten(vector, arch), path)
    else:
        save_genome(unflatten(vector, arch), path)


class GenerationLog:
    """In-memory rows mirrored to generation.csv as the run progresses."""

    def __init__(self, path: Path):
        self.path = path
        self.rows: list[dict] = []
        self._fh = open(path, "w")
        self._fh.write(",".join(GENERATION_CSV_COLUMNS) + "\n")
        self._fh.flush()

    def append(self, row: dict) -> None:
        self.rows.append(row)
        self._fh.write(_format_row([row[c] for c in GENERATION_CSV_COLUMNS]) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def run_evolution(cfg: RunConfig, verbose: bool = False):
    """Train with the evolution strategy; returns (best vector, log rows).

    Writes generation.csv, checkpoints (mean/best parameters and optimizer
    state), a resolved-config snapshot, and run.log under cfg.output_dir.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    arch = apply_variant(cfg.variant, cfg.arch)
    dim = variant_parameter_count(cfg.variant, cfg.arch)
    ctx = _build_context(cfg)

    _atomic_write_text(out / "config_resolved.json",
                       json.dumps(cfg.to_dict(), indent=2) + "\n")
    log_lines = [
        f"variant: {cfg.variant.kind}",
        f"environments: {', '.join(cfg.environments)}",
        f"dimension: {dim}",
    ]
    if cfg.variant.kind != "symla":
        log_lines.append(describe_parameter_count(arch))
    _atomic_write_text(out / "run.log", "\n".join(log_lines) + "\n")

    es = CmaEs(np.zeros(dim), cfg.sigma0, cfg.population)
    sampler = np.random.default_rng(
        np.random.SeedSequence(cfg.master_seed, spawn_key=(_SAMPLER_STREAM,)))

    def checkpoint(best_vector: np.ndarray | None) -> None:
        _save_vector(out / "mean_genome.json", es.mean, cfg, arch)
        _atomic_write_text(out / "cma_state.json", json.dumps(es.to_dict()))
        if best_vector is not None:
            _save_vector(out / "best_genome.json", best_vector, cfg, arch)

    kernels.warm_up()
    checkpoint(None)

    workers = cfg.workers if cfg.workers is not None else (os.cpu_count() or 1)
    workers = max(1, min(workers, cfg.population))
    pool = None
    if workers > 1:
        pool = multiprocessing.get_context("fork").Pool(
            workers, initializer=_init_worker, initargs=(ctx,))
    _init_worker(ctx)

    log = GenerationLog(out / "generation.csv")
    timing_fh = open(out / "timing.csv", "w")
    timing_fh.write("generation,wall_time_s\n")

    best_fitness = -np.inf
    best_vector: np.ndarray | None = None
    try:
        for gen in range(cfg.generations):
            t0 = time.perf_counter()
            candidates = es.ask(sampler)
            tasks = [(gen, i, candidates[i]) for i in range(cfg.population)]
            if pool is not None:
                results = pool.map(_evaluate_vector, tasks,
                                   chunksize=max(1, cfg.population // (4 * workers)))
            else:
                results = [_evaluate_vector(t) for t in tasks]
            fitness = np.array([r[0] for r in results])
            norms = np.array([r[1] for r in results])  # (population, n_envs)

            gen_best = int(np.argmax(fitness))
            if fitness[gen_best] > best_fitness:
                best_fitness = float(fitness[gen_best])
                best_vector = candidates[gen_best].copy()

            es.tell(candidates, fitness)

            mean_norms = {name: None for name in SPECS}
            for env_idx, name in enumerate(cfg.environments):
                mean_norms[name] = float(norms[:, env_idx].mean())
            row = {
                "generation": gen,
                "pop_mean_fitness": float(fitness.mean()),
                "pop_best_fitness": float(fitness.max()),
                "mean_norm_cartpole": mean_norms["cartpole"],
                "mean_norm_acrobot": mean_norms["acrobot"],
                "mean_norm_mountaincar": mean_norms["mountaincar"],
                "sigma": float(es.sigma),
            }
            log.append(row)
            timing_fh.write(f"{gen},{time.perf_counter() - t0:.3f}\n")
            timing_fh.flush()
            if verbose:
                print(f"gen {gen:4d}  fitness mean {row['pop_mean_fitness']:.4f}  "
                      f"best {row['pop_best_fitness']:.4f}  sigma {es.sigma:.4f}",
                      flush=True)

            if (gen + 1) % cfg.checkpoint_every == 0:
                checkpoint(best_vector)

            if cfg.early_stop_mean_norm is not None and len(cfg.environments) == 1:
                if row[f"mean_norm_{cfg.environments[0]}"] >= cfg.early_stop_mean_norm:
                    if verbose:
                        print(f"early stop: population mean normalized score reached "
                              f"{cfg.early_stop_mean_norm}", flush=True)
                    break
    finally:
        if pool is not None:
            pool.close()
            pool.join()
        log.close()
        timing_fh.close()

    checkpoint(best_vector)
    _atomic_write_text(out / "DONE", "completed\n")
    return best_vector if best_vector is not None else es.mean.copy(), log.rows
