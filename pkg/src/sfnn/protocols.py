"""Post-training evaluation: lifetime protocols, weight dumps, curve export.

Three protocols probe a trained parameter set: fresh random wiring per
lifetime (the training condition), one fixed wiring shared by all lifetimes,
and fresh wiring plus random relabelings of observation and action indices
drawn once per lifetime.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .envs import ENV_ORDER, SPECS, EnvSpec
from .fitness import LifetimeConfig, run_lifetime, weighted_lifetime_score
from .genome import ConfigurationError, Genome
from .network import adjacency_fingerprint, sample_adjacency
from .variants import SymlaParams, symla_run_lifetime

PROTOCOL_KINDS = ("random_adjacency", "fixed_adjacency", "permuted_io")


@dataclass(frozen=True)
class EvalProtocol:
    kind: str = "random_adjacency"
    n_lifetimes: int = 100
    fixed_adjacency_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in PROTOCOL_KINDS:
            raise ConfigurationError(f"unknown protocol {self.kind!r}")
        if self.n_lifetimes < 1:
            raise ConfigurationError("n_lifetimes must be >= 1")
        if self.kind == "fixed_adjacency" and self.fixed_adjacency_seed is None:
            raise ConfigurationError("fixed_adjacency requires fixed_adjacency_seed")
        if self.kind != "fixed_adjacency" and self.fixed_adjacency_seed is not None:
            raise ConfigurationError("fixed_adjacency_seed only applies to fixed_adjacency")


def fixed_adjacency_for_env(fixed_seed: int, spec: EnvSpec, arch) -> np.ndarray:
    """The one wiring mask a fixed-adjacency setting uses for an environment.

    Derived from (seed, environment identity) so training and evaluation
    reconstruct the same mask independently.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(fixed_seed, spawn_key=(ENV_ORDER.index(spec.name),)))
    n_hidden = arch.n_total_neurons - spec.obs_dim - spec.n_actions
    return sample_adjacency(spec.obs_dim, n_hidden, spec.n_actions, arch.sparsity, rng)


@dataclass
class EvalResult:
    episode_scores: np.ndarray       # (n_lifetimes, n_episodes)
    lifetime_scores: np.ndarray      # (n_lifetimes,), weighted
    wiring_fingerprints: list[str]   # one per lifetime

    @property
    def per_episode_means(self) -> np.ndarray:
        return self.episode_scores.mean(axis=0)

    @property
    def mean_lifetime_score(self) -> float:
        return float(self.lifetime_scores.mean())


def run_protocol(policy_params, spec: EnvSpec, protocol: EvalProtocol,
                 lifetime_cfg: LifetimeConfig, seed: int) -> EvalResult:
    """Evaluate a parameter set over many lifetimes under one protocol.

    Each lifetime gets an independent stream; permutations draw from a child
    stream separate from the one driving wiring and resets, so the identity
    permutation reproduces the random-wiring trajectories exactly.
    """
    is_symla = isinstance(policy_params, SymlaParams)
    fixed_mask = None
    if protocol.kind == "fixed_adjacency":
        if is_symla:
            raise ConfigurationError("the shared-LSTM baseline has no wiring mask")
        fixed_mask = fixed_adjacency_for_env(protocol.fixed_adjacency_seed, spec,
                                             policy_params.arch)
    weights = lifetime_cfg.episode_weights
    all_scores = []
    lifetime_scores = []
    fingerprints = []
    for lid in range(protocol.n_lifetimes):
        ss = np.random.SeedSequence(seed, spawn_key=(lid,))
        net_ss, perm_ss = ss.spawn(2)
        rng = np.random.default_rng(net_ss)
        perm_in = perm_out = None
        if protocol.kind == "permuted_io":
            perm_rng = np.random.default_rng(perm_ss)
            perm_in = perm_rng.permutation(spec.obs_dim)
            perm_out = perm_rng.permutation(spec.n_actions)
        if is_symla:
            scores, _ = symla_run_lifetime(policy_params, spec, lifetime_cfg, rng,
                                           perm_in=perm_in, perm_out=perm_out)
            fingerprints.append("fully-connected")
        else:
            scores, net = run_lifetime(policy_params, spec, lifetime_cfg, rng,
                                       adjacency=fixed_mask,
                                       perm_in=perm_in, perm_out=perm_out)
            fingerprints.append(adjacency_fingerprint(net.adjacency))
        all_scores.append(scores)
        lifetime_scores.append(weighted_lifetime_score(scores, weights))
    return EvalResult(
        episode_scores=np.array(all_scores),
        lifetime_scores=np.array(lifetime_scores),
        wiring_fingerprints=fingerprints,
    )


def write_eval_csv(result: EvalResult, path: Path) -> None:
    """Rows of (lifetime_id, episode_index, episode_score) plus mean rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lifetime_id", "episode_index", "episode_score"])
        n_eps = result.episode_scores.shape[1]
        for lid in range(result.episode_scores.shape[0]):
            for ep in range(n_eps):
                writer.writerow([lid, ep + 1, repr(float(result.episode_scores[lid, ep]))])
        for ep, mean in enumerate(result.per_episode_means):
            writer.writerow(["mean", ep + 1, repr(float(mean))])


def weights_snapshot(genome: Genome, spec: EnvSpec, seed: int,
                     at_episode: int, clip: float = 10.0) -> np.ndarray:
    """Dense synapse-strength matrix after `at_episode` episodes of a lifetime.

    Entry (p, q) is the sum of the synapse vector's elements for live edge
    p -> q, clipped to +-clip; absent edges read exactly zero.
    """
    if at_episode < 0:
        raise ValueError("at_episode must be >= 0")
    _, net = run_lifetime(genome, spec, LifetimeConfig(max(at_episode, 1)),
                          seed, n_episodes=at_episode)
    n = net.n_total
    matrix = np.zeros((n, n))
    sums = net.syn_state.sum(axis=1)
    matrix[net.edge_pre, net.edge_post] = np.clip(sums, -clip, clip)
    return matrix


def write_matrix_csv(matrix: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


# -- training-curve aggregation ---------------------------------------------------

_CURVE_COLUMNS = ("pop_mean_fitness", "mean_norm_cartpole", "mean_norm_acrobot",
                  "mean_norm_mountaincar")


def read_generation_csv(run_dir: Path) -> list[dict]:
    path = Path(run_dir) / "generation.csv"
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def export_curves(run_dirs) -> tuple[list[str], list[list]]:
    """Per-generation mean and std across runs for fitness and env scores.

    Runs of unequal length are truncated to the shortest with a warning.
    Returns (header, rows) ready for CSV writing.
    """
    runs = [read_generation_csv(d) for d in run_dirs]
    if not runs:
        raise ValueError("need at least one run directory")
    lengths = [len(r) for r in runs]
    n_gen = min(lengths)
    if len(set(lengths)) > 1:
        warnings.warn(
            f"run lengths differ {lengths}; truncating to {n_gen} generations",
            RuntimeWarning, stacklevel=2,
        )
    header = ["generation"]
    for col in _CURVE_COLUMNS:
        header += [f"{col}_mean", f"{col}_std"]
    rows = []
    for g in range(n_gen):
        row: list = [g]
        for col in _CURVE_COLUMNS:
            raw = [run[g][col] for run in runs]
            if any(v == "" for v in raw):
                row += ["", ""]
            else:
                vals = np.array([float(v) for v in raw])
                row += [repr(float(vals.mean())), repr(float(vals.std()))]
        rows.append(row)
    return header, rows


def write_curves_csv(header, rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
