"""Lifetime evaluation: episode weighting, score normalization, aggregation.

A lifetime is a fixed number of episodes in one environment with the plastic
network state carried across episode boundaries.  Later episodes weigh more:
episode i (1-based) contributes i divided by the sum of all episode numbers.
An individual's fitness over several environments is the product of its
min-max normalized lifetime scores, so failure anywhere zeroes the total.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .envs import EnvSpec, episode_rollout, policy_rollout
from .genome import Genome
from .network import NetworkState, begin_episode, env_step, init_network


@dataclass(frozen=True)
class LifetimeConfig:
    n_episodes: int = 8

    def __post_init__(self) -> None:
        if self.n_episodes < 1:
            raise ValueError("a lifetime needs at least one episode")

    @property
    def episode_weights(self) -> np.ndarray:
        i = np.arange(1, self.n_episodes + 1, dtype=np.float64)
        return i / i.sum()


def run_lifetime(genome: Genome, spec: EnvSpec, lifetime_cfg: LifetimeConfig,
                 seed, *, adjacency: np.ndarray | None = None,
                 perm_in: np.ndarray | None = None,
                 perm_out: np.ndarray | None = None,
                 n_episodes: int | None = None) -> tuple[list[float], NetworkState]:
    """Run one lifetime; returns per-episode scores and the final network.

    The seed (or generator) drives wiring, synapse initialization and every
    episode reset, in that order.  `adjacency` overrides wiring sampling;
    `perm_in`/`perm_out` relabel observation and action indices for the whole
    lifetime.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    net = init_network(genome, spec.obs_dim, spec.n_actions, rng, adjacency=adjacency)
    if n_episodes is None:
        n_episodes = lifetime_cfg.n_episodes
    permuted = perm_in is not None or perm_out is not None
    if permuted:
        p_in = np.arange(spec.obs_dim) if perm_in is None else np.asarray(perm_in)
        p_out = np.arange(spec.n_actions) if perm_out is None else np.asarray(perm_out)

        def policy(obs, prev_reward):
            return int(p_out[env_step(net, genome, obs[p_in], prev_reward)])

    scores: list[float] = []
    for _ in range(n_episodes):
        begin_episode(net)
        if permuted:
            scores.append(policy_rollout(spec, rng, policy))
        else:
            scores.append(episode_rollout(genome, spec, net, rng))
    return scores, net


def weighted_lifetime_score(episode_scores, weights: np.ndarray) -> float:
    total = 0.0
    for w, s in zip(weights, episode_scores):
        total += w * s
    return total


def lifetime_score(genome: Genome, spec: EnvSpec, lifetime_cfg: LifetimeConfig,
                   seed, **kwargs) -> float:
    """Weighted sum of episode scores over one freshly wired lifetime."""
    scores, _ = run_lifetime(genome, spec, lifetime_cfg, seed, **kwargs)
    return weighted_lifetime_score(scores, lifetime_cfg.episode_weights)


def normalize_score(score: float, spec: EnvSpec) -> float:
    """Map [min_score, max_score] affinely onto [0, 1]; clamp and warn outside."""
    lo, hi = spec.min_score, spec.max_score
    if score < lo or score > hi:
        warnings.warn(
            f"{spec.name} score {score} outside [{lo}, {hi}]; clamping",
            RuntimeWarning, stacklevel=2,
        )
        score = min(max(score, lo), hi)
    return (score - lo) / (hi - lo)


def aggregate_fitness(normalized) -> float:
    """Product of per-environment normalized scores; zero if any is zero."""
    total = 1.0
    for v in normalized:
        total *= v
    return total


def evaluate_individual(genome: Genome, specs, lifetime_cfg: LifetimeConfig,
                        seed_bundle, **kwargs) -> float:
    """Fitness over one lifetime per environment, each with its own seed."""
    fitness, _ = evaluate_individual_detailed(genome, specs, lifetime_cfg,
                                              seed_bundle, **kwargs)
    return fitness


def evaluate_individual_detailed(genome: Genome, specs, lifetime_cfg: LifetimeConfig,
                                 seed_bundle, *, adjacency_by_env=None) -> tuple[float, list[float]]:
    specs = list(specs)
    if len(seed_bundle) != len(specs):
        raise ValueError("need exactly one seed per environment")
    normalized = []
    for idx, (spec, seed) in enumerate(zip(specs, seed_bundle)):
        adjacency = None
        if adjacency_by_env is not None:
            adjacency = adjacency_by_env[idx]
        score = lifetime_score(genome, spec, lifetime_cfg, seed, adjacency=adjacency)
        normalized.append(normalize_score(score, spec))
    return aggregate_fitness(normalized), normalized
