"""Deep belief network: a stack of RBMs trained greedily, bottom to top."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rbm as _rbm
from .numerics import sigmoid


@dataclass
class DbnParams:
    layers: list

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("a DBN needs at least one layer")
        for k in range(1, len(self.layers)):
            if self.layers[k].n_visible != self.layers[k - 1].n_hidden:
                raise ValueError(
                    f"layer {k} expects {self.layers[k].n_visible} inputs but layer "
                    f"{k - 1} has {self.layers[k - 1].n_hidden} hidden units"
                )

    @property
    def sizes(self):
        return [self.layers[0].n_visible] + [l.n_hidden for l in self.layers]

    @property
    def n_layers(self):
        return len(self.layers)

    def flatten(self):
        return np.concatenate([l.flatten() for l in self.layers])

    @classmethod
    def from_flat(cls, theta, sizes):
        out, pos = [], 0
        for J, I in zip(sizes[:-1], sizes[1:]):
            n = I * J + I + J
            out.append(_rbm.RbmParams.from_flat(theta[pos : pos + n], J, I))
            pos += n
        if pos != len(theta):
            raise ValueError("flat parameter vector has the wrong length")
        return cls(out)

    def copy(self):
        return DbnParams([l.copy() for l in self.layers])


def init_dbn(sizes, rng):
    """Fresh stack for layer sizes ``[J, I_1, ..., I_l]``; layer k draws from ``rng.child("init", k)``."""
    if len(sizes) < 2:
        raise ValueError("sizes must list the input width and at least one hidden layer")
    return DbnParams(
        [_rbm.init_rbm(J, I, rng.child("init", k)) for k, (J, I) in enumerate(zip(sizes[:-1], sizes[1:]))]
    )


def propagate(d, x):
    """Deterministic upward pass. Returns ``[mu^1, ..., mu^l]``.

    Works on a single vector or on a batch of rows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != d.layers[0].n_visible:
        raise ValueError(f"input width {x.shape[-1]} != {d.layers[0].n_visible}")
    acts, h = [], x
    for layer in d.layers:
        h = sigmoid(h @ layer.W.T + layer.c)
        acts.append(h)
    return acts


def top_conditional(d, x):
    """Bernoulli means of the top layer given the mean-field state of the layer below.

    The distribution over binary ``h^l`` is the product of these independent
    Bernoullis.
    """
    return propagate(d, x)[-1]


def top_preactivation(d, x):
    """``c_l + W_l mu^{l-1}``, the logits of :func:`top_conditional`."""
    x = np.asarray(x, dtype=np.float64)
    below = propagate(DbnParams(d.layers[:-1]), x)[-1] if d.n_layers > 1 else x
    top = d.layers[-1]
    return below @ top.W.T + top.c


def log_px_approx(d, x):
    """Layer-1 RBM log-likelihood, the stand-in for the full DBN marginal.

    Upper layers are ignored by the approximation.
    """
    return _rbm.exact_log_px(d.layers[0], x)


def pretrain_layerwise(sizes, data, hyper, rng, history=None, init=None):
    """Greedy CD-k pretraining.

    Layer 1 is trained on ``data``; layer k on the mean activations of the
    frozen layers below. Layer k draws its initialisation, shuffles and Gibbs
    noise only from ``rng.child("pretrain", k)``, so its result does not depend
    on anything above it. Per-epoch reconstruction cross-entropy of each
    layer is appended to ``history.pretrain_recon`` when a history is given.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[1] != sizes[0]:
        raise ValueError(f"data width {data.shape[1]} != input size {sizes[0]}")
    if init is None:
        init = init_dbn(sizes, rng)
    elif init.sizes != list(sizes):
        raise ValueError("init stack does not match sizes")
    layers = []
    inputs = data
    n = inputs.shape[0]
    bs = hyper.batch_size
    for k, layer in enumerate(init.layers):
        p = layer.copy()
        lrng = rng.child("pretrain", k)
        for epoch in range(hyper.pretrain_epochs):
            erng = lrng.child("epoch", epoch)
            order = erng.child("shuffle").permutation(n)
            for b, start in enumerate(range(0, n, bs)):
                batch = inputs[order[start : start + bs]]
                g = _rbm.cd_k_grad(p, batch, hyper.cd_k, erng.child("batch", b))
                p = _rbm.RbmParams(
                    p.W - hyper.pretrain_lr * g.dW,
                    p.b - hyper.pretrain_lr * g.db,
                    p.c - hyper.pretrain_lr * g.dc,
                )
            if history is not None:
                history.pretrain_recon.append(_rbm.reconstruction_cross_entropy(p, inputs))
        layers.append(p)
        inputs = _rbm.prob_h_given_x(p, inputs)
    return DbnParams(layers)
