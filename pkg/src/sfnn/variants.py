"""Comparison settings: ablations of the typed plastic network and a baseline.

Three ablations are pure configuration transforms (one shared parameter set
for everything; fully connected wiring; one adjacency mask reused across all
lifetimes).  The fourth setting is a separate architecture: a fully connected
feedforward stack whose synapses are copies of a single LSTM cell, holding
private hidden/cell states, with deterministic argmax outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .envs import EnvSpec, policy_rollout
from .genome import ArchConfig, ConfigurationError, LayoutError, count_parameters

VARIANT_KINDS = ("standard", "single_type", "fully_connected", "fixed_adjacency", "symla")


@dataclass(frozen=True)
class VariantSpec:
    kind: str = "standard"
    fixed_adjacency_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in VARIANT_KINDS:
            raise ConfigurationError(f"unknown variant {self.kind!r}")
        if self.kind == "fixed_adjacency" and self.fixed_adjacency_seed is None:
            raise ConfigurationError("fixed_adjacency requires fixed_adjacency_seed")
        if self.kind != "fixed_adjacency" and self.fixed_adjacency_seed is not None:
            raise ConfigurationError("fixed_adjacency_seed only applies to fixed_adjacency")


def apply_variant(variant: VariantSpec, base: ArchConfig) -> ArchConfig:
    """Effective architecture for a variant; identity except where noted."""
    if variant.kind == "single_type":
        return replace(base, n_neuron_types=1, n_synapse_types=1)
    if variant.kind == "fully_connected":
        return replace(base, sparsity=0.0)
    return base


def variant_parameter_count(variant: VariantSpec, base: ArchConfig) -> int:
    if variant.kind == "symla":
        return symla_count_parameters(base.activation_size)
    return count_parameters(apply_variant(variant, base))


# -- shared-LSTM baseline ------------------------------------------------------

SYMLA_LSTM_INPUT = 3  # pre value, post value, reward


def symla_count_parameters(hidden_size: int) -> int:
    h = hidden_size
    return 4 * (h * SYMLA_LSTM_INPUT + h * h + h)


@dataclass
class SymlaParams:
    """One LSTM parameter set shared by every synapse; gates i, f, g, o."""

    arch: ArchConfig
    w: np.ndarray  # (4, H, 3)
    u: np.ndarray  # (4, H, H)
    b: np.ndarray  # (4, H)

    def __post_init__(self) -> None:
        h = self.arch.activation_size
        for name, shape in (("w", (4, h, SYMLA_LSTM_INPUT)), ("u", (4, h, h)),
                            ("b", (4, h))):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise LayoutError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, np.ascontiguousarray(arr, dtype=np.float64))


def symla_flatten(params: SymlaParams) -> np.ndarray:
    return np.concatenate([params.w.ravel(), params.u.ravel(), params.b.ravel()])


def symla_unflatten(vector: np.ndarray, arch: ArchConfig) -> SymlaParams:
    vector = np.asarray(vector, dtype=np.float64)
    h = arch.activation_size
    if vector.ndim != 1 or vector.size != symla_count_parameters(h):
        raise LayoutError(
            f"parameter vector has length {vector.size}, layout requires "
            f"{symla_count_parameters(h)}"
        )
    nw = 4 * h * SYMLA_LSTM_INPUT
    nu = 4 * h * h
    return SymlaParams(
        arch=arch,
        w=vector[:nw].reshape(4, h, SYMLA_LSTM_INPUT).copy(),
        u=vector[nw:nw + nu].reshape(4, h, h).copy(),
        b=vector[nw + nu:].reshape(4, h).copy(),
    )


def save_symla(params: SymlaParams, path: str | Path) -> None:
    doc = {
        "layout": "symla-1",
        "model": "symla",
        "arch": params.arch.to_dict(),
        "params": [float(v) for v in symla_flatten(params)],
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_symla(path: str | Path) -> SymlaParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("model") != "symla" or doc.get("layout") != "symla-1":
        raise LayoutError("not a symla parameter file")
    arch = ArchConfig.from_dict(doc["arch"])
    return symla_unflatten(np.array(doc["params"], dtype=np.float64), arch)


@dataclass
class SymlaState:
    """Per-lifetime state: scalar unit values plus private LSTM states."""

    n_in: int
    n_hidden: int
    n_out: int
    hid_val: np.ndarray   # (n_hidden,)
    out_val: np.ndarray   # (n_out,)
    h1: np.ndarray        # (n_in * n_hidden, H)
    c1: np.ndarray
    h2: np.ndarray        # (n_hidden * n_out, H)
    c2: np.ndarray
    last_action: Optional[int] = None

    @property
    def plastic_parameter_count(self) -> int:
        return 2 * (self.h1.size + self.h2.size)


def symla_init_network(params: SymlaParams, n_in: int, n_out: int,
                       rng: np.random.Generator) -> SymlaState:
    n_total = params.arch.n_total_neurons
    if n_in + n_out >= n_total:
        raise ConfigurationError(
            f"{n_in} inputs + {n_out} outputs leave no hidden units out of {n_total}"
        )
    n_hidden = n_total - n_in - n_out
    h = params.arch.activation_size
    return SymlaState(
        n_in=n_in, n_hidden=n_hidden, n_out=n_out,
        hid_val=np.zeros(n_hidden),
        out_val=np.zeros(n_out),
        h1=rng.uniform(-0.1, 0.1, (n_in * n_hidden, h)),
        c1=rng.uniform(-0.1, 0.1, (n_in * n_hidden, h)),
        h2=rng.uniform(-0.1, 0.1, (n_hidden * n_out, h)),
        c2=rng.uniform(-0.1, 0.1, (n_hidden * n_out, h)),
    )


def symla_begin_episode(state: SymlaState) -> None:
    state.hid_val[:] = 0.0
    state.out_val[:] = 0.0
    state.last_action = None


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _lstm_layer(params: SymlaParams, h: np.ndarray, c: np.ndarray,
                pre_vals: np.ndarray, post_vals: np.ndarray, reward: float,
                n_pre: int, n_post: int) -> np.ndarray:
    """Update every synapse LSTM of one layer; returns new post unit values.

    Synapse (p, q) has row index p * n_post + q.  Its input is the pre unit's
    value, the post unit's previous value, and the reward.  The forwarded
    message is the first element of the new hidden state; a post unit's value
    is tanh of its incoming messages, summed in ascending value order so unit
    relabelings cannot change the result.
    """
    x = np.empty((n_pre * n_post, SYMLA_LSTM_INPUT))
    x[:, 0] = np.repeat(pre_vals, n_post)
    x[:, 1] = np.tile(post_vals, n_pre)
    x[:, 2] = reward
    gi = _sigmoid(x @ params.w[0].T + h @ params.u[0].T + params.b[0])
    gf = _sigmoid(x @ params.w[1].T + h @ params.u[1].T + params.b[1])
    gg = np.tanh(x @ params.w[2].T + h @ params.u[2].T + params.b[2])
    go = _sigmoid(x @ params.w[3].T + h @ params.u[3].T + params.b[3])
    c[:] = gf * c + gi * gg
    h[:] = go * np.tanh(c)
    messages = h[:, 0].reshape(n_pre, n_post)
    summed = np.add.reduce(np.sort(messages, axis=0), axis=0)
    return np.tanh(summed)


def symla_step(params: SymlaParams, state: SymlaState, obs: np.ndarray,
               prev_reward: float) -> int:
    """One environment timestep of the baseline; deterministic argmax action."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (state.n_in,):
        raise ValueError(f"observation has shape {obs.shape}, expected ({state.n_in},)")
    new_hid = _lstm_layer(params, state.h1, state.c1, obs, state.hid_val,
                          prev_reward, state.n_in, state.n_hidden)
    new_out = _lstm_layer(params, state.h2, state.c2, new_hid, state.out_val,
                          prev_reward, state.n_hidden, state.n_out)
    state.hid_val = new_hid
    state.out_val = new_out
    action = int(np.argmax(new_out))
    state.last_action = action
    return action


def symla_run_lifetime(params: SymlaParams, spec: EnvSpec, lifetime_cfg,
                       seed, *, perm_in: np.ndarray | None = None,
                       perm_out: np.ndarray | None = None,
                       n_episodes: int | None = None) -> tuple[list[float], SymlaState]:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = symla_init_network(params, spec.obs_dim, spec.n_actions, rng)
    p_in = np.arange(spec.obs_dim) if perm_in is None else np.asarray(perm_in)
    p_out = np.arange(spec.n_actions) if perm_out is None else np.asarray(perm_out)

    def policy(obs, prev_reward):
        return int(p_out[symla_step(params, state, obs[p_in], prev_reward)])

    if n_episodes is None:
        n_episodes = lifetime_cfg.n_episodes
    scores: list[float] = []
    for _ in range(n_episodes):
        symla_begin_episode(state)
        scores.append(policy_rollout(spec, rng, policy))
    return scores, state
