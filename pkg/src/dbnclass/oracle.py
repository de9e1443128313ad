"""Brute-force reference computations.

Everything here is written from the model definitions (the energy function,
the sigmoid/softmax stack) and deliberately avoids calling the production
routines it is used to check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_ENUM_BITS = 20


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class FdSpec:
    eps: float = 1e-5
    scheme: str = "central"

    def __post_init__(self):
        if not 1e-8 <= self.eps <= 1e-2:
            raise ValueError("eps must lie in [1e-8, 1e-2]")
        if self.scheme != "central":
            raise ValueError("only central differences are supported")


def fd_gradient(f, theta, spec=FdSpec()):
    """Central-difference gradient of scalar ``f`` at flat ``theta``."""
    theta = np.array(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + spec.eps
        fp = f(theta.copy())
        theta[i] = orig - spec.eps
        fm = f(theta.copy())
        theta[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise OracleError(f"non-finite function value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * spec.eps)
    return grad


def fd_jacobian(f, theta, spec=FdSpec()):
    """Central-difference Jacobian of vector-valued ``f``; row i is d f_i."""
    theta = np.array(theta, dtype=np.float64)
    cols = []
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + spec.eps
        fp = np.asarray(f(theta.copy()), dtype=np.float64)
        theta[i] = orig - spec.eps
        fm = np.asarray(f(theta.copy()), dtype=np.float64)
        theta[i] = orig
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise OracleError(f"non-finite function value near coordinate {i}")
        cols.append((fp - fm) / (2.0 * spec.eps))
    return np.stack(cols, axis=1)


def max_relative_error(a, b):
    """``max|a - b| / max(max|a|, max|b|)``, normwise so tiny entries cannot dominate."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def _states(n):
    return np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(2**n, n)


def _lse(v):
    m = np.max(v)
    return m + np.log(np.sum(np.exp(v - m)))


def _check_bits(n):
    if n > MAX_ENUM_BITS:
        raise OracleError(f"refusing to enumerate 2**{n} states (limit 2**{MAX_ENUM_BITS})")


def _stats(X, H):
    """Sufficient statistics of -E for paired rows: (h x^T row-major, x, h)."""
    outer = (H[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
    return np.concatenate([outer, X, H], axis=1)


def _joint_table(W, b, c):
    I, J = W.shape
    _check_bits(I + J)
    X = np.repeat(_states(J), 2**I, axis=0)
    H = np.tile(_states(I), (2**J, 1))
    neg_e = np.einsum("ni,ij,nj->n", H, W, X) + H @ c + X @ b
    return _stats(X, H), neg_e


def _weighted_cov(S, logw):
    w = np.exp(logw - _lse(logw))
    m = w @ S
    return (S * w[:, None]).T @ S - np.outer(m, m)


def brute_log_partition(W, b, c):
    """``log Z`` summing ``exp(-E)`` over every (x, h) pair."""
    _, neg_e = _joint_table(np.asarray(W), np.asarray(b), np.asarray(c))
    return float(_lse(neg_e))


def brute_log_px(W, b, c, x):
    W, b, c, x = (np.asarray(a, dtype=np.float64) for a in (W, b, c, x))
    hs = _states(W.shape[0])
    neg_e = hs @ W @ x + hs @ c + b @ x
    return float(_lse(neg_e) - brute_log_partition(W, b, c))


def _conditional_cov(W, b, c, x):
    hs = _states(W.shape[0])
    Sc = _stats(np.broadcast_to(x, (hs.shape[0], x.size)), hs)
    return _weighted_cov(Sc, hs @ W @ x + hs @ c + b @ x)


def _unpack(p):
    return (np.asarray(a, dtype=np.float64) for a in (p.W, p.b, p.c))


def exact_rbm_hessian(p, x):
    """Hessian of ``-log p(x)`` over flat ``(W row-major, b, c)``.

    ``-log p(x) = log Z - log sum_h exp(-E(x, h))`` and ``-E`` is linear in
    the parameters, so the Hessian is the joint covariance of the sufficient
    statistics minus their covariance under ``p(h|x)``. Both covariances are
    taken by enumeration. ``x`` may be real-valued in [0, 1].
    """
    return mean_rbm_hessian(p, np.asarray(x, dtype=np.float64)[None, :])


def mean_rbm_hessian(p, X):
    """Average of :func:`exact_rbm_hessian` over the rows of ``X``."""
    W, b, c = _unpack(p)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    H = _weighted_cov(*_joint_table(W, b, c))
    H = H - sum(_conditional_cov(W, b, c, x) for x in X) / X.shape[0]
    return 0.5 * (H + H.T)


def closed_form_w_hessian_entry(p, x, first, second):
    """One W-W entry of the Hessian of ``-log p(x)`` from the hand-derived closed forms.

    ``first = (p, q)`` and ``second = (k, l)`` index ``w_pq`` and ``w_kl``.
    For ``g = d log p / d w_pq = s_p(x) x_q - sum_x' p(x') s_p(x') x'_q``
    with ``s_p = sigmoid(net_p)``, ``net_p = sum_q w_pq x_q + c_p``:

    * ``k == p``: ``s_p(1-s_p) x_q x_l - sum_x' [dp(x')/dw_pl s_p x'_q + p(x') s_p(1-s_p) x'_q x'_l]``
    * ``k != p``: ``- sum_x' dp(x')/dw_kl s_p x'_q``

    with ``dp(x')/dw_kl = p(x') (s_k(x') x'_l - E[s_k x_l])``. The returned
    value is negated to give the Hessian of ``-log p``.
    """
    W = np.asarray(p.W, dtype=np.float64)
    b = np.asarray(p.b, dtype=np.float64)
    c = np.asarray(p.c, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    pp, q = first
    k, l = second
    _check_bits(W.shape[1])
    xs = _states(W.shape[1])
    sig = lambda a: 1.0 / (1.0 + np.exp(-a))
    net = xs @ W.T + c
    log_unnorm = xs @ b + np.sum(np.log1p(np.exp(net)), axis=1)
    px = np.exp(log_unnorm - _lse(log_unnorm))
    s = sig(net)
    dpx_dwkl = px * (s[:, k] * xs[:, l] - px @ (s[:, k] * xs[:, l]))
    s_data = sig(W[pp] @ x + c[pp])
    if k == pp:
        d2 = s_data * (1 - s_data) * x[q] * x[l] - np.sum(
            dpx_dwkl * s[:, pp] * xs[:, q] + px * s[:, pp] * (1 - s[:, pp]) * xs[:, q] * xs[:, l]
        )
    else:
        d2 = -np.sum(dpx_dwkl * s[:, pp] * xs[:, q])
    return float(-d2)


def _top_means_and_loss_inputs(net, x):
    h = np.asarray(x, dtype=np.float64)
    for layer in net.dbn.layers:
        a = np.asarray(layer.W) @ h + np.asarray(layer.c)
        h = 1.0 / (1.0 + np.exp(-a))
    return h


def enumerate_expected_loss(net, x, y, return_weights=False):
    """``sum_h P(h|x) L(y, h)`` over every binary top state, by explicit loops."""
    m = _top_means_and_loss_inputs(net, x)
    n_top = m.size
    _check_bits(n_top)
    U = np.asarray(net.clf.U)
    d = np.asarray(net.clf.d)
    total, weights = 0.0, []
    for bits in itertools.product((0, 1), repeat=n_top):
        h = np.array(bits, dtype=np.float64)
        wgt = 1.0
        for mi, hi in zip(m, bits):
            wgt *= mi if hi else (1.0 - mi)
        z = U @ h + d
        loss = _lse(z) - z[int(y)]
        total += wgt * loss
        weights.append(wgt)
    if return_weights:
        return total, np.array(weights)
    return total
