"""Binary restricted Boltzmann machine.

Energy ``E(x, h) = -h.W.x - c.h - b.x`` with ``W`` shaped ``(hidden, visible)``.
Conditionals are the usual symmetric pair ``p(h=1|x) = sigmoid(c + W x)`` and
``p(x=1|h) = sigmoid(b + W^T h)``.

Besides the CD-k estimator used in training, the module carries exact
enumeration routines (partition function, log-likelihood, likelihood gradient)
for machines small enough to enumerate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .numerics import as_float_array, logsumexp, sigmoid

ENUM_LIMIT_BITS = 24


class EnumerationLimitError(ValueError):
    """Raised when an exact routine would enumerate more than 2**24 states."""


@dataclass
class RbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.W = as_float_array(self.W, 2, "W")
        self.b = as_float_array(self.b, 1, "b")
        self.c = as_float_array(self.c, 1, "c")
        n_hidden, n_visible = self.W.shape
        if self.b.shape != (n_visible,) or self.c.shape != (n_hidden,):
            raise ValueError(
                f"inconsistent shapes W{self.W.shape}, b{self.b.shape}, c{self.c.shape}"
            )

    @property
    def n_visible(self):
        return self.W.shape[1]

    @property
    def n_hidden(self):
        return self.W.shape[0]

    @property
    def size(self):
        return self.W.size + self.b.size + self.c.size

    def flatten(self):
        """Parameters as one vector in the order ``W`` (row-major), ``b``, ``c``."""
        return np.concatenate([self.W.ravel(), self.b, self.c])

    @classmethod
    def from_flat(cls, theta, n_visible, n_hidden):
        theta = np.asarray(theta, dtype=np.float64)
        nw = n_hidden * n_visible
        if theta.shape != (nw + n_visible + n_hidden,):
            raise ValueError("flat parameter vector has the wrong length")
        return cls(
            theta[:nw].reshape(n_hidden, n_visible).copy(),
            theta[nw : nw + n_visible].copy(),
            theta[nw + n_visible :].copy(),
        )

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(np.zeros((n_hidden, n_visible)), np.zeros(n_visible), np.zeros(n_hidden))

    def copy(self):
        return RbmParams(self.W.copy(), self.b.copy(), self.c.copy())


@dataclass
class RbmGrad:
    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray

    def flatten(self):
        return np.concatenate([self.dW.ravel(), self.db, self.dc])

    def scaled(self, s):
        return RbmGrad(self.dW * s, self.db * s, self.dc * s)

    def __add__(self, other):
        return RbmGrad(self.dW + other.dW, self.db + other.db, self.dc + other.dc)

    def sq_norm(self):
        return float(np.sum(self.dW**2) + np.sum(self.db**2) + np.sum(self.dc**2))

    @classmethod
    def zeros_like(cls, p):
        return cls(np.zeros_like(p.W), np.zeros_like(p.b), np.zeros_like(p.c))


def init_rbm(n_visible, n_hidden, rng):
    """Uniform(-a, a) weights with ``a = 4*sqrt(6/(I+J))``, zero biases."""
    a = 4.0 * np.sqrt(6.0 / (n_visible + n_hidden))
    W = rng.generator.uniform(-a, a, size=(n_hidden, n_visible))
    return RbmParams(W, np.zeros(n_visible), np.zeros(n_hidden))


def _check_len(v, n, name):
    if v.shape[-1] != n:
        raise ValueError(f"{name} has length {v.shape[-1]}, expected {n}")


def energy(p, x, h):
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    _check_len(x, p.n_visible, "x")
    _check_len(h, p.n_hidden, "h")
    return float(-(h @ p.W @ x) - p.c @ h - p.b @ x)


def prob_h_given_x(p, x):
    """``sigmoid(c + W x)``; ``x`` may be a vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(x, p.n_visible, "x")
    return sigmoid(x @ p.W.T + p.c)


def prob_x_given_h(p, h):
    h = np.asarray(h, dtype=np.float64)
    _check_len(h, p.n_hidden, "h")
    return sigmoid(h @ p.W + p.b)


def free_energy(p, x):
    """``-log sum_h exp(-E(x, h))``; vectorised over rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(x, p.n_visible, "x")
    return -(x @ p.b) - np.sum(np.logaddexp(0.0, x @ p.W.T + p.c), axis=-1)


def reconstruction_cross_entropy(p, X):
    """Mean binary cross-entropy of a one-step mean-field reconstruction."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    pre = prob_h_given_x(p, X) @ p.W + p.b
    # -[x log s(a) + (1-x) log(1-s(a))] = softplus(a) - x a
    return float(np.mean(np.sum(np.logaddexp(0.0, pre) - X * pre, axis=1)))


def cd_k_grad(p, batch, k, rng):
    """CD-k estimate of the mean gradient of ``-log p(x)`` over ``batch``.

    One chain per example, started at the data. The positive phase uses
    ``p(h|x)`` at the (possibly real-valued) data; the negative phase uses the
    binary visible state after ``k`` Gibbs sweeps together with the hidden
    means at that state. Randomness comes only from ``rng.uniform`` so two
    calls with streams at the same address share their random numbers.
    """
    X = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("cd_k_grad needs a nonempty batch")
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_len(X, p.n_visible, "batch")
    n = X.shape[0]

    ph0 = prob_h_given_x(p, X)
    ph = ph0
    xk = X
    for _ in range(k):
        h = (rng.uniform(ph.shape) < ph).astype(np.float64)
        px = prob_x_given_h(p, h)
        xk = (rng.uniform(px.shape) < px).astype(np.float64)
        ph = prob_h_given_x(p, xk)

    dW = -(ph0.T @ X - ph.T @ xk) / n
    db = -np.mean(X - xk, axis=0)
    dc = -np.mean(ph0 - ph, axis=0)
    return RbmGrad(dW, db, dc)


def all_binary_states(n):
    """All ``2**n`` binary vectors as rows, in lexicographic order."""
    if n == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)))


def _guard(p):
    bits = p.n_visible + p.n_hidden
    if bits > ENUM_LIMIT_BITS:
        raise EnumerationLimitError(
            f"exact enumeration needs 2**{bits} joint states; limit is 2**{ENUM_LIMIT_BITS}"
        )


def _visible_log_weights(p):
    """States and unnormalised log p(x) for every binary visible vector."""
    states = all_binary_states(p.n_visible)
    return states, -free_energy(p, states)


def exact_partition(p):
    """``log Z`` by enumerating visible states; hiddens are summed in closed form."""
    _guard(p)
    _, logw = _visible_log_weights(p)
    return float(logsumexp(logw))


def exact_log_px(p, x):
    _guard(p)
    x = np.asarray(x, dtype=np.float64)
    return float(-free_energy(p, x) - exact_partition(p))


def _model_means(p):
    states, logw = _visible_log_weights(p)
    probs = np.exp(logw - logsumexp(logw))
    ph = prob_h_given_x(p, states)
    return (ph * probs[:, None]).T @ states, probs @ states, probs @ ph


def exact_nll_grad(p, x):
    """Gradient of ``-log p(x)``: model expectation minus data term, by enumeration.

    ``x`` may be a single vector or a batch; a batch gives the mean gradient.
    """
    _guard(p)
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check_len(X, p.n_visible, "x")
    model_W, model_b, model_c = _model_means(p)
    ph = prob_h_given_x(p, X)
    n = X.shape[0]
    return RbmGrad(
        model_W - ph.T @ X / n,
        model_b - X.mean(axis=0),
        model_c - ph.mean(axis=0),
    )
