"""Softmax output layer on top of the DBN-shaped sigmoid network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dbn import DbnParams, propagate
from .numerics import as_float_array, log_softmax, softmax
from .rbm import RbmGrad


@dataclass
class ClassifierParams:
    U: np.ndarray  # (n_classes, top hidden size)
    d: np.ndarray

    def __post_init__(self):
        self.U = as_float_array(self.U, 2, "U")
        self.d = as_float_array(self.d, 1, "d")
        if self.d.shape != (self.U.shape[0],):
            raise ValueError("bias length must equal the number of classes")

    @property
    def n_classes(self):
        return self.U.shape[0]

    @property
    def n_inputs(self):
        return self.U.shape[1]

    @classmethod
    def zeros(cls, n_inputs, n_classes):
        return cls(np.zeros((n_classes, n_inputs)), np.zeros(n_classes))

    def flatten(self):
        return np.concatenate([self.U.ravel(), self.d])

    def copy(self):
        return ClassifierParams(self.U.copy(), self.d.copy())


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels differ in length")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("label out of range")

    def __len__(self):
        return self.labels.shape[0]


@dataclass
class Net:
    """Feed-forward view: the DBN stack plus the softmax head."""

    dbn: DbnParams
    clf: ClassifierParams

    def __post_init__(self):
        if self.clf.n_inputs != self.dbn.layers[-1].n_hidden:
            raise ValueError("classifier width does not match the top hidden layer")

    def flatten(self):
        return np.concatenate([self.dbn.flatten(), self.clf.flatten()])

    def unflatten(self, theta):
        """New net of the same shape from a flat vector (layers, then U, d)."""
        theta = np.asarray(theta, dtype=np.float64)
        nd = sum(l.size for l in self.dbn.layers)
        C, H = self.clf.U.shape
        if theta.shape != (nd + C * H + C,):
            raise ValueError("flat parameter vector has the wrong length")
        dbn = DbnParams.from_flat(theta[:nd], self.dbn.sizes)
        clf = ClassifierParams(theta[nd : nd + C * H].reshape(C, H).copy(), theta[nd + C * H :].copy())
        return Net(dbn, clf)

    def copy(self):
        return Net(self.dbn.copy(), self.clf.copy())


@dataclass
class NetGrad:
    layers: list  # RbmGrad per layer
    dU: np.ndarray
    dd: np.ndarray

    def flatten(self):
        return np.concatenate([g.flatten() for g in self.layers] + [self.dU.ravel(), self.dd])

    def __add__(self, other):
        return NetGrad(
            [a + b for a, b in zip(self.layers, other.layers)],
            self.dU + other.dU,
            self.dd + other.dd,
        )


def logits(phi, h):
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != phi.n_inputs:
        raise ValueError(f"feature width {h.shape[-1]} != {phi.n_inputs}")
    return h @ phi.U.T + phi.d


def forward_loss(phi, h, y):
    """``-log softmax(U h + d)[y]`` for one feature vector."""
    if not 0 <= int(y) < phi.n_classes:
        raise ValueError(f"class index {y} out of range [0, {phi.n_classes})")
    return float(-log_softmax(logits(phi, h))[int(y)])


def batch_losses(phi, H, y):
    """Per-row losses for a feature batch ``H``."""
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= phi.n_classes):
        raise ValueError("class index out of range")
    lp = log_softmax(logits(phi, H))
    return -lp[np.arange(lp.shape[0]), y]


def predict(phi, h):
    """Argmax of the logits; ``np.argmax`` already breaks ties toward the lowest index."""
    return np.argmax(logits(phi, h), axis=-1)


def backprop_stack(dbn, X, acts, d_top):
    """Push ``dLoss/d mu^l`` (rows already weighted) down through the sigmoid stack.

    Returns one :class:`RbmGrad` per layer; visible biases get zero gradient
    because the feed-forward pass never touches them.
    """
    grads = [None] * dbn.n_layers
    delta_h = d_top
    for k in range(dbn.n_layers - 1, -1, -1):
        mu = acts[k]
        below = acts[k - 1] if k > 0 else X
        delta_pre = delta_h * mu * (1.0 - mu)
        layer = dbn.layers[k]
        grads[k] = RbmGrad(delta_pre.T @ below, np.zeros(layer.n_visible), delta_pre.sum(axis=0))
        if k > 0:
            delta_h = delta_pre @ layer.W
    return grads


def backward_batch(net, X, y):
    """Mean loss over the batch and its gradient w.r.t. every feed-forward parameter."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    n = X.shape[0]
    acts = propagate(net.dbn, X)
    top = acts[-1]
    z = logits(net.clf, top)
    lp = log_softmax(z)
    loss = float(-np.mean(lp[np.arange(n), y]))
    delta = softmax(z)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    dU = delta.T @ top
    dd = delta.sum(axis=0)
    layers = backprop_stack(net.dbn, X, acts, delta @ net.clf.U)
    return loss, NetGrad(layers, dU, dd)


def backward(net, x, y):
    """Gradient of ``forward_loss(propagate(x), y)`` for one example."""
    return backward_batch(net, np.asarray(x, dtype=np.float64)[None, :], [y])[1]


def error_rate(net, data):
    if len(data) == 0:
        return float("nan")
    pred = predict(net.clf, propagate(net.dbn, data.inputs)[-1])
    return float(np.mean(pred != data.labels))
