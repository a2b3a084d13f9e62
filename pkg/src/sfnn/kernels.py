"""Hot loops for network propagation and synaptic updates, compiled with numba.

All floating-point reductions here have a frozen evaluation order: incoming
signals are summed in stored edge order (creation rank), and every dot product
accumulates in ascending index order.  The transcendental batches (sigmoid,
tanh of the gate pre-activations) are applied by the caller with numpy ufuncs,
which are elementwise-deterministic, so a synapse's update does not depend on
how many other synapses are processed alongside it.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def micro_tick(act, snapshot, pending, n_in, out_start, indptr, edge_pre,
               syn_state, feedback, neuron_type, neuron_w, neuron_b):
    """One synchronous propagation sweep.

    Reads the pre-tick snapshot, accumulates each non-input neuron's incoming
    signals (elementwise product of pre-activation and synapse vector, with
    the first element of signals from output neurons replaced by the action
    feedback), applies the neuron's linear layer and tanh.  Input rows are
    left untouched.  `pending` receives the accumulated input sums.
    """
    n_total, a = act.shape
    for i in range(n_total):
        for e in range(a):
            snapshot[i, e] = act[i, e]
    for q in range(n_in, n_total):
        for e in range(a):
            s = 0.0
            for k in range(indptr[q], indptr[q + 1]):
                p = edge_pre[k]
                if e == 0 and p >= out_start:
                    s += feedback[p - out_start]
                else:
                    s += snapshot[p, e] * syn_state[k, e]
            pending[q, e] = s
    for q in range(n_in, n_total):
        t = neuron_type[q]
        for i in range(a):
            v = neuron_b[t, i]
            for j in range(a):
                v += neuron_w[t, i, j] * pending[q, j]
            act[q, i] = math.tanh(v)


@njit(cache=True)
def gate_projections(prev_act, act, reward, wz, bz, wr, br, wn, bn, proj, base):
    """Per-neuron input projections of the three GRU gates.

    Every edge leaving neuron p contributes Wg[:, :A] @ prev_act[p], and every
    edge entering neuron q contributes Wg[:, A:2A] @ act[q]; both only depend
    on (gate, synapse type, neuron), so they are computed once here.
    proj[g, t, n, 0] holds the pre part, proj[g, t, n, 1] the post part, and
    base[g, t] the reward column times reward plus the gate bias.
    """
    n_total, a = act.shape
    st = wz.shape[0]
    for g in range(3):
        w = wz if g == 0 else (wr if g == 1 else wn)
        b = bz if g == 0 else (br if g == 1 else bn)
        for t in range(st):
            for i in range(a):
                base[g, t, i] = w[t, i, 2 * a] * reward + b[t, i]
            for p in range(n_total):
                for i in range(a):
                    s_pre = 0.0
                    s_post = 0.0
                    for j in range(a):
                        s_pre += w[t, i, j] * prev_act[p, j]
                        s_post += w[t, i, a + j] * act[p, j]
                    proj[g, t, p, 0, i] = s_pre
                    proj[g, t, p, 1, i] = s_post


@njit(cache=True)
def gate_preactivations(edge_pre, edge_post, edge_type, syn_state, uz, ur,
                        proj, base, zr):
    """Negated update- and reset-gate pre-activations, into zr[0] and zr[1].

    Stored as min(-s, 708) so the caller's exp cannot overflow: the logistic
    gate becomes 1 / (1 + exp(zr)), exact 1.0 when saturated high and a
    subnormal positive when saturated low.
    """
    n_edges = edge_pre.shape[0]
    a = syn_state.shape[1]
    for k in range(n_edges):
        t = edge_type[k]
        p = edge_pre[k]
        q = edge_post[k]
        for i in range(a):
            sz = proj[0, t, p, 0, i] + proj[0, t, q, 1, i] + base[0, t, i]
            sr = proj[1, t, p, 0, i] + proj[1, t, q, 1, i] + base[1, t, i]
            uzd = 0.0
            urd = 0.0
            for j in range(a):
                h = syn_state[k, j]
                uzd += uz[t, i, j] * h
                urd += ur[t, i, j] * h
            zr[0, k, i] = min(-(sz + uzd), 708.0)
            zr[1, k, i] = min(-(sr + urd), 708.0)


@njit(cache=True)
def candidate_preactivations(edge_pre, edge_post, edge_type, syn_state, un,
                             proj, base, r_gate, cand):
    """Candidate-state pre-activations; the reset gate scales the hidden state."""
    n_edges = edge_pre.shape[0]
    a = syn_state.shape[1]
    for k in range(n_edges):
        t = edge_type[k]
        p = edge_pre[k]
        q = edge_post[k]
        for i in range(a):
            s = proj[2, t, p, 0, i] + proj[2, t, q, 1, i] + base[2, t, i]
            und = 0.0
            for j in range(a):
                und += un[t, i, j] * (r_gate[k, j] * syn_state[k, j])
            cand[k, i] = s + und


@njit(cache=True)
def apply_additive_update(edge_type, syn_state, z_gate, cand, learning_rate,
                          lr_constant):
    """h <- h + lr * (z*h + (1-z)*n): the full GRU output is added, scaled."""
    n_edges = syn_state.shape[0]
    a = syn_state.shape[1]
    for k in range(n_edges):
        alpha = learning_rate[edge_type[k]] * lr_constant
        for i in range(a):
            h = syn_state[k, i]
            z = z_gate[k, i]
            syn_state[k, i] = h + alpha * (z * h + (1.0 - z) * cand[k, i])


def warm_up() -> None:
    """Force compilation of all kernels on tiny inputs (cached across runs)."""
    a = 2
    act = np.zeros((3, a))
    snapshot = np.zeros((3, a))
    pending = np.zeros((3, a))
    indptr = np.array([0, 0, 1, 1], dtype=np.int64)
    edge_pre = np.array([0], dtype=np.int64)
    edge_post = np.array([1], dtype=np.int64)
    edge_type = np.array([0], dtype=np.int64)
    syn = np.zeros((1, a))
    feedback = np.zeros(1)
    ntype = np.zeros(3, dtype=np.int64)
    nw = np.zeros((1, a, a))
    nb = np.zeros((1, a))
    micro_tick(act, snapshot, pending, 1, 2, indptr, edge_pre, syn, feedback,
               ntype, nw, nb)
    g = 2 * a + 1
    w = np.zeros((1, a, g))
    u = np.zeros((1, a, a))
    b = np.zeros((1, a))
    proj = np.zeros((3, 1, 3, 2, a))
    base = np.zeros((3, 1, a))
    zr = np.zeros((2, 1, a))
    cand = np.zeros((1, a))
    lr = np.zeros(1)
    gate_projections(act, act, 0.0, w, b, w, b, w, b, proj, base)
    gate_preactivations(edge_pre, edge_post, edge_type, syn, u, u, proj, base, zr)
    candidate_preactivations(edge_pre, edge_post, edge_type, syn, u, proj, base,
                             zr[1], cand)
    apply_additive_update(edge_type, syn, zr[0], cand, lr, 0.01)
