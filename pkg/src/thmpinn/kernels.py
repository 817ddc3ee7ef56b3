"""Vectorized MLP evaluation with input-derivative channels.

This is the training hot path. For a batch of points X (M x d) it propagates,
layer by layer, the network value together with first-derivative channels for
every input coordinate and second-derivative channels for requested
coordinate pairs. Writing U = P_in W^T and V = Q_in W^T for the
pre-activation tangents, a tanh layer maps the channels as

    Z = tanh(A),  P_k = (1 - Z^2) U_k,
    Q_km = -2 Z (1 - Z^2) U_k U_m + (1 - Z^2) V_km,

and :func:`backward_channels` accumulates exact parameter gradients of any
weighted combination of the three channel kinds by running these recursions
in reverse. Matrix products go through BLAS; the elementwise recursions are
numba-compiled by default with a pure-numpy fallback
(``THMPINN_BACKEND=numpy``). Results of the two backends agree to roundoff
and are each deterministic; see ``benchmarks/bench_kernels.py``.

Correctness is pinned against :mod:`thmpinn.autodiff` in the test suite: the
channels must match graph derivatives and the parameter gradients must match
reverse sweeps over recorded tangent graphs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .network import NetworkParams

# ---------------------------------------------------------------------------
# elementwise kernels, numpy variants


def _fwd_hidden_np(A, U, V, kidx, midx, Z, P, Q):
    np.tanh(A, out=Z)
    S1 = 1.0 - Z * Z
    np.multiply(S1, U, out=P)
    if V.shape[0]:
        S2 = -2.0 * Z * S1
        Q[...] = S2 * U[kidx] * U[midx] + S1 * V


def _pq_chain_np(Z, U, V, kidx, midx, P, Q):
    S1 = 1.0 - Z * Z
    np.multiply(S1, U, out=P)
    if V.shape[0]:
        S2 = -2.0 * Z * S1
        Q[...] = S2 * U[kidx] * U[midx] + S1 * V


def _bwd_hidden_np(Z, U, V, kidx, midx, Zhat, Phat, Qhat, Ahat, Uhat, Vhat):
    S1 = 1.0 - Z * Z
    S2 = -2.0 * Z * S1
    s1hat = np.einsum("kmo,kmo->mo", Phat, U)
    np.multiply(Phat, S1, out=Uhat)
    if V.shape[0]:
        Uk = U[kidx]
        Um = U[midx]
        s1hat += np.einsum("pmo,pmo->mo", Qhat, V)
        s2hat = np.einsum("pmo,pmo->mo", Qhat, Uk * Um)
        np.multiply(Qhat, S1, out=Vhat)
        qs2 = Qhat * S2
        for p in range(V.shape[0]):
            Uhat[kidx[p]] += qs2[p] * Um[p]
            Uhat[midx[p]] += qs2[p] * Uk[p]
        ztot = Zhat - 2.0 * Z * s1hat + (6.0 * Z * Z - 2.0) * s2hat
    else:
        ztot = Zhat - 2.0 * Z * s1hat
    np.multiply(ztot, S1, out=Ahat)


# ---------------------------------------------------------------------------
# elementwise kernels, loop variants (numba-compiled on demand)


def _fwd_hidden_loops(A, U, V, kidx, midx, Z, P, Q):
    M, O = A.shape
    d = U.shape[0]
    npair = V.shape[0]
    for m in range(M):
        for o in range(O):
            z = math.tanh(A[m, o])
            Z[m, o] = z
            s1 = 1.0 - z * z
            s2 = -2.0 * z * s1
            for k in range(d):
                P[k, m, o] = s1 * U[k, m, o]
            for p in range(npair):
                Q[p, m, o] = (
                    s2 * U[kidx[p], m, o] * U[midx[p], m, o] + s1 * V[p, m, o]
                )


def _pq_chain_loops(Z, U, V, kidx, midx, P, Q):
    M, O = Z.shape
    d = U.shape[0]
    npair = V.shape[0]
    for m in range(M):
        for o in range(O):
            z = Z[m, o]
            s1 = 1.0 - z * z
            s2 = -2.0 * z * s1
            for k in range(d):
                P[k, m, o] = s1 * U[k, m, o]
            for p in range(npair):
                Q[p, m, o] = (
                    s2 * U[kidx[p], m, o] * U[midx[p], m, o] + s1 * V[p, m, o]
                )


def _bwd_hidden_loops(Z, U, V, kidx, midx, Zhat, Phat, Qhat, Ahat, Uhat, Vhat):
    M, O = Z.shape
    d = U.shape[0]
    npair = V.shape[0]
    for m in range(M):
        for o in range(O):
            z = Z[m, o]
            s1 = 1.0 - z * z
            s2 = -2.0 * z * s1
            s1hat = 0.0
            s2hat = 0.0
            for k in range(d):
                s1hat += Phat[k, m, o] * U[k, m, o]
                Uhat[k, m, o] = Phat[k, m, o] * s1
            for p in range(npair):
                qh = Qhat[p, m, o]
                uk = U[kidx[p], m, o]
                um = U[midx[p], m, o]
                s1hat += qh * V[p, m, o]
                s2hat += qh * uk * um
                Vhat[p, m, o] = qh * s1
                Uhat[kidx[p], m, o] += qh * s2 * um
                Uhat[midx[p], m, o] += qh * s2 * uk
            ztot = Zhat[m, o] - 2.0 * z * s1hat + (6.0 * z * z - 2.0) * s2hat
            Ahat[m, o] = ztot * s1


_NUMPY_KERNELS = (_fwd_hidden_np, _pq_chain_np, _bwd_hidden_np)
_numba_kernels = None


def _get_numba_kernels():
    global _numba_kernels
    if _numba_kernels is None:
        from numba import njit

        _numba_kernels = tuple(
            njit(cache=True)(f)
            for f in (_fwd_hidden_loops, _pq_chain_loops, _bwd_hidden_loops)
        )
    return _numba_kernels


_active_backend = backend.BACKEND


def set_active_backend(name: str):
    """Switch the elementwise kernel implementation at runtime."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba":
        _get_numba_kernels()
    global _active_backend
    _active_backend = name


def get_active_backend() -> str:
    return _active_backend


def _kernels():
    if _active_backend == "numba":
        return _get_numba_kernels()
    return _NUMPY_KERNELS


# ---------------------------------------------------------------------------
# layer bookkeeping


@dataclass
class ChannelCache:
    """Forward intermediates needed by :func:`backward_channels`."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]      # (O, I)
    weights_t: list[np.ndarray]    # (I, O), contiguous
    z_chain: list[np.ndarray]      # inputs to each layer + final output
    u_chain: list[np.ndarray]      # pre-activation first tangents per layer
    v_chain: list[np.ndarray]      # pre-activation second tangents per layer
    kidx: np.ndarray
    midx: np.ndarray


def forward_channels(params: NetworkParams, X, pairs=()):
    """Evaluate value, all first derivatives, and paired second derivatives.

    Returns ``(value (M,), grad (d, M), second (n_pairs, M), cache)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    M, d = X.shape
    if d != params.layer_sizes[0]:
        raise ValueError(
            f"points have {d} coordinates, network expects {params.layer_sizes[0]}"
        )
    pairs = np.asarray(
        [(int(k), int(m)) for k, m in pairs], dtype=np.int64
    ).reshape(-1, 2)
    kidx = np.ascontiguousarray(pairs[:, 0])
    midx = np.ascontiguousarray(pairs[:, 1])
    npair = kidx.shape[0]
    fwd_hidden, _, _ = _kernels()

    weights = [np.ascontiguousarray(w) for w in params.weights]
    weights_t = [np.ascontiguousarray(w.T) for w in params.weights]
    n_layers = len(weights)

    z = X
    p_chain = np.zeros((d, M, d))
    for k in range(d):
        p_chain[k, :, k] = 1.0
    q_chain = np.zeros((npair, M, d))

    z_chain = [z]
    u_chain: list[np.ndarray] = []
    v_chain: list[np.ndarray] = []
    for l in range(n_layers):
        wt = weights_t[l]
        o_size = wt.shape[1]
        a = z @ wt + params.biases[l]
        u = np.empty((d, M, o_size))
        for k in range(d):
            u[k] = p_chain[k] @ wt
        v = np.empty((npair, M, o_size))
        for p in range(npair):
            v[p] = q_chain[p] @ wt
        u_chain.append(u)
        v_chain.append(v)
        if l < n_layers - 1:
            z = np.empty((M, o_size))
            p_chain = np.empty((d, M, o_size))
            q_chain = np.empty((npair, M, o_size))
            fwd_hidden(a, u, v, kidx, midx, z, p_chain, q_chain)
        else:
            z, p_chain, q_chain = a, u, v
        z_chain.append(z)

    value = np.ascontiguousarray(z[:, 0])
    grad = np.ascontiguousarray(p_chain[:, :, 0])
    second = np.ascontiguousarray(q_chain[:, :, 0])
    cache = ChannelCache(
        params.layer_sizes, weights, weights_t, z_chain, u_chain, v_chain,
        kidx, midx,
    )
    return value, grad, second, cache


def backward_channels(cache: ChannelCache, adj_value=None, adj_grad=None,
                      adj_second=None):
    """Parameter gradients of sum(adj_value*value + adj_grad.grad + ...).

    Adjoint arrays have the shapes returned by :func:`forward_channels`
    (value ``(M,)``, grad ``(d, M)``, second ``(n_pairs, M)``); ``None``
    means a zero adjoint. Returns ``(dWs, dbs)`` shaped like the parameters.
    """
    _, pq_chain, bwd_hidden = _kernels()
    kidx, midx = cache.kidx, cache.midx
    M = cache.z_chain[0].shape[0]
    d = cache.z_chain[0].shape[1]
    npair = kidx.shape[0]
    n_layers = len(cache.weights)

    zhat = np.zeros((M, 1))
    if adj_value is not None:
        zhat[:, 0] = adj_value
    phat = np.zeros((d, M, 1))
    if adj_grad is not None:
        phat[:, :, 0] = adj_grad
    qhat = np.zeros((npair, M, 1))
    if adj_second is not None:
        qhat[:, :, 0] = adj_second

    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        o_size = cache.sizes[l + 1]
        if l == n_layers - 1:
            ahat, uhat, vhat = zhat, phat, qhat
        else:
            ahat = np.empty((M, o_size))
            uhat = np.empty((d, M, o_size))
            vhat = np.empty((npair, M, o_size))
            bwd_hidden(
                cache.z_chain[l + 1], cache.u_chain[l], cache.v_chain[l],
                kidx, midx, zhat, phat, qhat, ahat, uhat, vhat,
            )
        if l == 0:
            p_in = np.zeros((d, M, d))
            for k in range(d):
                p_in[k, :, k] = 1.0
            q_in = np.zeros((npair, M, d))
        else:
            i_size = cache.sizes[l]
            p_in = np.empty((d, M, i_size))
            q_in = np.empty((npair, M, i_size))
            pq_chain(
                cache.z_chain[l], cache.u_chain[l - 1], cache.v_chain[l - 1],
                kidx, midx, p_in, q_in,
            )
        dwt = cache.z_chain[l].T @ ahat
        for k in range(d):
            dwt += p_in[k].T @ uhat[k]
        for p in range(npair):
            dwt += q_in[p].T @ vhat[p]
        d_weights[l] = np.ascontiguousarray(dwt.T)
        d_biases[l] = ahat.sum(axis=0)
        if l > 0:
            w = cache.weights[l]
            zhat = ahat @ w
            phat_next = np.empty((d, M, cache.sizes[l]))
            for k in range(d):
                phat_next[k] = uhat[k] @ w
            qhat_next = np.empty((npair, M, cache.sizes[l]))
            for p in range(npair):
                qhat_next[p] = vhat[p] @ w
            phat, qhat = phat_next, qhat_next
    return d_weights, d_biases
