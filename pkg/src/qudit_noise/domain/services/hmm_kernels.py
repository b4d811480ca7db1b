"""Compiled recursions for hidden-Markov training and decoding.

Emission likelihoods enter as ``b[t, i] = exp(log_b[t, i] - shift[t])`` with
the per-step maximum shifted out, so every row has a largest entry of 1 and
the scaled recursions cannot underflow.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def forward_scaled(b, initial, transitions):  # type: ignore[no-untyped-def]
    """Scaled forward pass; returns (alpha_hat, scale) with sum_i alpha_hat[t, i] = 1."""
    n_steps, n_states = b.shape
    alpha = np.empty((n_steps, n_states))
    scale = np.empty(n_steps)

    total = 0.0
    for i in range(n_states):
        alpha[0, i] = initial[i] * b[0, i]
        total += alpha[0, i]
    scale[0] = total
    for i in range(n_states):
        alpha[0, i] /= total

    for t in range(1, n_steps):
        total = 0.0
        for j in range(n_states):
            acc = 0.0
            for i in range(n_states):
                acc += alpha[t - 1, i] * transitions[i, j]
            alpha[t, j] = acc * b[t, j]
            total += alpha[t, j]
        scale[t] = total
        if total > 0.0:
            for j in range(n_states):
                alpha[t, j] /= total
    return alpha, scale


@numba.njit(cache=True)
def backward_accumulate(b, transitions, alpha, scale):  # type: ignore[no-untyped-def]
    """Scaled backward pass; returns (gamma, xi summed over time)."""
    n_steps, n_states = b.shape
    beta = np.ones(n_states)
    previous = np.empty(n_states)
    gamma = np.empty((n_steps, n_states))
    xi = np.zeros((n_states, n_states))

    for i in range(n_states):
        gamma[n_steps - 1, i] = alpha[n_steps - 1, i]

    for t in range(n_steps - 2, -1, -1):
        c = scale[t + 1]
        for j in range(n_states):
            previous[j] = b[t + 1, j] * beta[j] / c if c > 0.0 else 0.0
        norm = 0.0
        for i in range(n_states):
            acc = 0.0
            for j in range(n_states):
                term = transitions[i, j] * previous[j]
                acc += term
                xi[i, j] += alpha[t, i] * term
            beta[i] = acc
            gamma[t, i] = alpha[t, i] * acc
            norm += gamma[t, i]
        if norm > 0.0:
            for i in range(n_states):
                gamma[t, i] /= norm
    return gamma, xi


@numba.njit(cache=True)
def viterbi_path(log_b, log_initial, log_transitions):  # type: ignore[no-untyped-def]
    """Most probable state path in log space; ties resolve to the lower index."""
    n_steps, n_states = log_b.shape
    delta = np.empty(n_states)
    candidate = np.empty(n_states)
    back = np.zeros((n_steps, n_states), dtype=np.int64)

    for i in range(n_states):
        delta[i] = log_initial[i] + log_b[0, i]

    for t in range(1, n_steps):
        for j in range(n_states):
            best = -math.inf
            arg = 0
            for i in range(n_states):
                value = delta[i] + log_transitions[i, j]
                if value > best:
                    best = value
                    arg = i
            candidate[j] = best + log_b[t, j]
            back[t, j] = arg
        for j in range(n_states):
            delta[j] = candidate[j]

    best = -math.inf
    last = 0
    for i in range(n_states):
        if delta[i] > best:
            best = delta[i]
            last = i

    path = np.empty(n_steps, dtype=np.int64)
    path[n_steps - 1] = last
    for t in range(n_steps - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best
