"""Plastic network state: random sparse wiring, propagation, and synapse updates.

Neurons are ordered [inputs | hidden | outputs].  Edges may run input->hidden,
hidden->hidden (self-connections included), hidden->output and output->hidden.
Each live edge owns a state vector that serves both as the synaptic weight and
as the hidden state of the GRU update rule of its type; edges absent at
initialization never exist later.

Edges are stored grouped by post-synaptic neuron (CSR) and, within a group,
ordered by creation rank.  Incoming signals are summed in that stored order,
which travels with any relabeling of neurons, so permuting a network and
stepping it commutes bitwise with stepping and then permuting.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .genome import ArchConfig, ConfigurationError, Genome

INPUT, HIDDEN, OUTPUT = 0, 1, 2


@dataclass
class NetworkState:
    """One agent lifetime's mutable state; single-owner, not thread-safe."""

    n_in: int
    n_hidden: int
    n_out: int
    arch: ArchConfig
    adjacency: np.ndarray        # (N, N) bool, [pre, post]
    edge_pre: np.ndarray         # (E,) int64, CSR order (post-major, rank within)
    edge_post: np.ndarray        # (E,) int64
    edge_rank: np.ndarray        # (E,) int64, creation order; fixes summation order
    edge_type: np.ndarray        # (E,) int64, synapse-type parameter index
    indptr: np.ndarray           # (N+1,) int64
    syn_state: np.ndarray        # (E, A); synaptic weights = GRU hidden states
    activations: np.ndarray      # (N, A)
    prev_activations: np.ndarray  # (N, A), snapshot from the previous timestep
    pending_signals: np.ndarray  # (N, A), incoming sums of the latest micro tick
    feedback: np.ndarray         # (n_out,), one-hot of the latest action
    neuron_type: np.ndarray      # (N,) int64, neuron-type parameter index
    last_action: Optional[int] = None

    def __post_init__(self) -> None:
        a = self.arch.activation_size
        n = self.arch.n_total_neurons
        e = self.edge_pre.shape[0]
        st = self.arch.n_synapse_types
        self._snapshot = np.zeros((n, a))
        self._proj = np.zeros((3, st, n, 2, a))
        self._base = np.zeros((3, st, a))
        self._zr = np.zeros((2, e, a))
        self._cand = np.zeros((e, a))

    @property
    def n_total(self) -> int:
        return self.n_in + self.n_hidden + self.n_out

    @property
    def out_start(self) -> int:
        return self.n_in + self.n_hidden

    @property
    def n_edges(self) -> int:
        return self.edge_pre.shape[0]


def neuron_class_of(index: int, n_in: int, out_start: int) -> int:
    if index < n_in:
        return INPUT
    return HIDDEN if index < out_start else OUTPUT


def legal_edge_mask(n_in: int, n_hidden: int, n_out: int) -> np.ndarray:
    """Boolean (N, N) mask of the four permitted connection classes."""
    n = n_in + n_hidden + n_out
    h0, h1 = n_in, n_in + n_hidden
    mask = np.zeros((n, n), dtype=bool)
    mask[:h0, h0:h1] = True          # input -> hidden
    mask[h0:h1, h0:h1] = True        # hidden -> hidden (self-loops allowed)
    mask[h0:h1, h1:] = True          # hidden -> output
    mask[h1:, h0:h1] = True          # output -> hidden
    return mask


def sample_adjacency(n_in: int, n_hidden: int, n_out: int, sparsity: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Keep each legal edge independently with probability 1 - sparsity."""
    n = n_in + n_hidden + n_out
    keep = rng.random((n, n)) < (1.0 - sparsity)
    return legal_edge_mask(n_in, n_hidden, n_out) & keep


def init_network(genome: Genome, n_in: int, n_out: int, rng: np.random.Generator,
                 adjacency: np.ndarray | None = None) -> NetworkState:
    """Build a fresh lifetime network.

    Wiring is sampled at the architecture's sparsity unless an adjacency mask
    is supplied (it must contain only legal edges).  Live synapse vectors are
    i.i.d. uniform on (-0.1, 0.1); activations start at zero and no action
    feedback is active.
    """
    arch = genome.arch
    n = arch.n_total_neurons
    if n_in < 1 or n_out < 1:
        raise ConfigurationError("need at least one input and one output neuron")
    if n_in + n_out >= n:
        raise ConfigurationError(
            f"{n_in} inputs + {n_out} outputs leave no hidden neurons out of {n}"
        )
    n_hidden = n - n_in - n_out
    legal = legal_edge_mask(n_in, n_hidden, n_out)
    if adjacency is None:
        adjacency = legal & (rng.random((n, n)) < (1.0 - arch.sparsity))
    else:
        adjacency = np.asarray(adjacency, dtype=bool)
        if adjacency.shape != (n, n):
            raise ConfigurationError("adjacency mask has the wrong shape")
        if np.any(adjacency & ~legal):
            raise ConfigurationError("adjacency mask contains illegal edges")
        adjacency = adjacency.copy()
    init_values = rng.uniform(-0.1, 0.1, (n, n, arch.activation_size))

    # enumerate edges post-major (then pre ascending); this is creation order
    post_idx, pre_idx = np.nonzero(adjacency.T)
    edge_pre = pre_idx.astype(np.int64)
    edge_post = post_idx.astype(np.int64)
    n_edges = edge_pre.shape[0]
    edge_rank = np.arange(n_edges, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(edge_post, minlength=n), out=indptr[1:])

    classes = np.array([neuron_class_of(i, n_in, n_in + n_hidden) for i in range(n)],
                       dtype=np.int64)
    neuron_type = classes % arch.n_neuron_types
    edge_type = classes[edge_pre] % arch.n_synapse_types

    a = arch.activation_size
    syn_state = np.ascontiguousarray(init_values[edge_pre, edge_post])
    return NetworkState(
        n_in=n_in, n_hidden=n_hidden, n_out=n_out, arch=arch,
        adjacency=adjacency,
        edge_pre=edge_pre, edge_post=edge_post, edge_rank=edge_rank,
        edge_type=edge_type, indptr=indptr,
        syn_state=syn_state,
        activations=np.zeros((n, a)),
        prev_activations=np.zeros((n, a)),
        pending_signals=np.zeros((n, a)),
        feedback=np.zeros(n_out),
        neuron_type=neuron_type,
    )


def begin_episode(state: NetworkState) -> None:
    """Reset sensory state at an episode boundary; synapse states persist."""
    state.activations[:] = 0.0
    state.prev_activations[:] = 0.0
    state.pending_signals[:] = 0.0
    state.feedback[:] = 0.0
    state.last_action = None


def set_inputs(state: NetworkState, obs: np.ndarray) -> None:
    """Broadcast each observation element across its input neuron's vector."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (state.n_in,):
        raise ValueError(f"observation has shape {obs.shape}, expected ({state.n_in},)")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation contains non-finite values")
    state.activations[:state.n_in, :] = obs[:, None]


def micro_tick(state: NetworkState, genome: Genome) -> None:
    """One synchronous propagation sweep from the pre-tick snapshot."""
    kernels.micro_tick(
        state.activations, state._snapshot, state.pending_signals,
        state.n_in, state.out_start, state.indptr, state.edge_pre,
        state.syn_state, state.feedback, state.neuron_type,
        genome.neuron_w, genome.neuron_b,
    )


def read_action(state: NetworkState) -> tuple[int, np.ndarray]:
    """Action vector = first element of each output activation; argmax wins.

    Ties break toward the lowest index.
    """
    action_vector = state.activations[state.out_start:, 0].copy()
    action = int(np.argmax(action_vector))
    state.last_action = action
    return action, action_vector


def inject_action_feedback(state: NetworkState, action: int) -> None:
    """Until the next action, output neuron signals carry one-hot first elements."""
    if not 0 <= action < state.n_out:
        raise ValueError(f"action {action} outside [0, {state.n_out})")
    state.feedback[:] = 0.0
    state.feedback[action] = 1.0


def _run_plasticity(syn_state, edge_pre, edge_post, edge_type, prev_act, act,
                    reward, wz, bz, wr, br, wn, bn, uz, ur, un, learning_rate,
                    lr_constant, proj, base, zr, cand) -> None:
    """Shared GRU update pipeline; mutates syn_state in place."""
    kernels.gate_projections(prev_act, act, reward, wz, bz, wr, br, wn, bn,
                             proj, base)
    kernels.gate_preactivations(edge_pre, edge_post, edge_type, syn_state,
                                uz, ur, proj, base, zr)
    np.exp(zr, out=zr)
    np.add(zr, 1.0, out=zr)
    np.reciprocal(zr, out=zr)
    kernels.candidate_preactivations(edge_pre, edge_post, edge_type, syn_state,
                                     un, proj, base, zr[1], cand)
    np.tanh(cand, out=cand)
    kernels.apply_additive_update(edge_type, syn_state, zr[0], cand,
                                  learning_rate, lr_constant)


def update_synapses(state: NetworkState, genome: Genome, prev_reward: float) -> None:
    """Apply the per-type GRU rule to every live synapse.

    Pre-activations come from the previous environment timestep, post-
    activations from the final micro tick of the current one.
    """
    _run_plasticity(state.syn_state, state.edge_pre, state.edge_post,
                    state.edge_type, state.prev_activations, state.activations,
                    prev_reward, genome.wz, genome.bz, genome.wr, genome.br,
                    genome.wn, genome.bn, genome.uz, genome.ur, genome.un,
                    genome.learning_rate, state.arch.lr_constant,
                    state._proj, state._base, state._zr, state._cand)


def env_step(state: NetworkState, genome: Genome, obs: np.ndarray,
             prev_reward: float) -> int:
    """Full network update for one environment timestep; returns the action.

    The feedback one-hot of the previous timestep's action stays active during
    all micro ticks; the new action's feedback takes effect next timestep.
    Equivalent to set_inputs + micro ticks + read_action +
    inject_action_feedback + update_synapses, with validation elided on the
    per-step path.
    """
    state.prev_activations[:] = state.activations
    state.activations[:state.n_in, :] = np.asarray(obs, dtype=np.float64)[:, None]
    for _ in range(state.arch.n_micro_ticks):
        kernels.micro_tick(
            state.activations, state._snapshot, state.pending_signals,
            state.n_in, state.out_start, state.indptr, state.edge_pre,
            state.syn_state, state.feedback, state.neuron_type,
            genome.neuron_w, genome.neuron_b,
        )
    action = int(np.argmax(state.activations[state.out_start:, 0]))
    state.last_action = action
    state.feedback[:] = 0.0
    state.feedback[action] = 1.0
    update_synapses(state, genome, prev_reward)
    return action


@dataclass(frozen=True)
class SynapseRule:
    """The gate parameters and learning rate of one synapse type."""

    wz: np.ndarray
    uz: np.ndarray
    bz: np.ndarray
    wr: np.ndarray
    ur: np.ndarray
    br: np.ndarray
    wn: np.ndarray
    un: np.ndarray
    bn: np.ndarray
    learning_rate: float


def synapse_rule(genome: Genome, synapse_type: int) -> SynapseRule:
    t = synapse_type
    return SynapseRule(genome.wz[t], genome.uz[t], genome.bz[t],
                       genome.wr[t], genome.ur[t], genome.br[t],
                       genome.wn[t], genome.un[t], genome.bn[t],
                       float(genome.learning_rate[t]))


def gru_plasticity_step(rule: SynapseRule, h: np.ndarray, pre: np.ndarray,
                        post: np.ndarray, reward: float,
                        lr_constant: float) -> np.ndarray:
    """One synapse's update: h + lr * GRU(h, pre ++ post ++ [reward]).

    Runs the exact pipeline used for whole-network updates on a single-edge
    view, so stepping a synapse alone or within a network gives identical bits.
    """
    a = h.shape[0]
    one = lambda arr: np.ascontiguousarray(np.asarray(arr, dtype=np.float64)[None])
    syn = np.array(h, dtype=np.float64)[None, :].copy()
    edge = np.zeros(1, dtype=np.int64)
    prev_act = np.ascontiguousarray(pre, dtype=np.float64)[None, :]
    act = np.ascontiguousarray(post, dtype=np.float64)[None, :]
    proj = np.zeros((3, 1, 1, 2, a))
    base = np.zeros((3, 1, a))
    zr = np.zeros((2, 1, a))
    cand = np.zeros((1, a))
    _run_plasticity(syn, edge, edge, edge, prev_act, act, float(reward),
                    one(rule.wz), one(rule.bz), one(rule.wr), one(rule.br),
                    one(rule.wn), one(rule.bn), one(rule.uz), one(rule.ur),
                    one(rule.un), np.array([rule.learning_rate]),
                    float(lr_constant), proj, base, zr, cand)
    return syn[0]


def adjacency_fingerprint(adjacency: np.ndarray) -> str:
    """Stable hash of a wiring mask, for live-edge-set assertions."""
    h = hashlib.sha256()
    h.update(np.asarray(adjacency.shape, dtype=np.int64).tobytes())
    h.update(np.packbits(adjacency.astype(np.uint8)).tobytes())
    return h.hexdigest()


def _reindex_edges(state: NetworkState, index_map: np.ndarray,
                   feedback: np.ndarray, last_action: Optional[int]) -> NetworkState:
    """Rebuild a state with neurons relabeled by index_map (old -> new)."""
    n = state.n_total
    inverse = np.empty(n, dtype=np.int64)
    inverse[index_map] = np.arange(n, dtype=np.int64)
    new_pre = index_map[state.edge_pre]
    new_post = index_map[state.edge_post]
    order = np.lexsort((state.edge_rank, new_post))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(new_post[order], minlength=n), out=indptr[1:])
    new = NetworkState(
        n_in=state.n_in, n_hidden=state.n_hidden, n_out=state.n_out,
        arch=state.arch,
        adjacency=state.adjacency[inverse][:, inverse].copy(),
        edge_pre=new_pre[order].copy(),
        edge_post=new_post[order].copy(),
        edge_rank=state.edge_rank[order].copy(),
        edge_type=state.edge_type[order].copy(),
        indptr=indptr,
        syn_state=state.syn_state[order].copy(),
        activations=state.activations[inverse].copy(),
        prev_activations=state.prev_activations[inverse].copy(),
        pending_signals=state.pending_signals[inverse].copy(),
        feedback=feedback,
        neuron_type=state.neuron_type.copy(),
        last_action=last_action,
    )
    return new


def permute_hidden(state: NetworkState, perm: np.ndarray) -> NetworkState:
    """Relabel hidden neurons: old hidden slot i becomes new slot perm[i].

    Edge creation ranks travel with the edges, so the permuted network sums
    incoming signals in exactly the order of its unpermuted twin.
    """
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(state.n_hidden)):
        raise ValueError("perm must be a permutation of the hidden indices")
    index_map = np.arange(state.n_total, dtype=np.int64)
    index_map[state.n_in:state.out_start] = state.n_in + perm
    return _reindex_edges(state, index_map, state.feedback.copy(), state.last_action)


def permute_io(state: NetworkState, perm_in: np.ndarray,
               perm_out: np.ndarray) -> NetworkState:
    """Relabel input neurons by perm_in and output neurons by perm_out.

    Observations and action indices must be relabeled the same way by the
    caller for behavior to be preserved.
    """
    perm_in = np.asarray(perm_in, dtype=np.int64)
    perm_out = np.asarray(perm_out, dtype=np.int64)
    if sorted(perm_in.tolist()) != list(range(state.n_in)):
        raise ValueError("perm_in must be a permutation of the input indices")
    if sorted(perm_out.tolist()) != list(range(state.n_out)):
        raise ValueError("perm_out must be a permutation of the output indices")
    index_map = np.arange(state.n_total, dtype=np.int64)
    index_map[:state.n_in] = perm_in
    index_map[state.out_start:] = state.out_start + perm_out
    feedback = np.zeros_like(state.feedback)
    feedback[perm_out] = state.feedback
    last = state.last_action
    if last is not None:
        last = int(perm_out[last])
    return _reindex_edges(state, index_map, feedback, last)
