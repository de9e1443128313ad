"""Training strategies for DBN-based classifiers.

Seven interchangeable ways to fit the same network (sigmoid DBN stack plus a
softmax head):

``DBN_FFN``
    two-phase baseline: greedy pretraining, then supervised fine-tuning of the
    whole feed-forward net.
``DBN_PLUS_LOSS``
    classification loss plus ``rho`` times the layer-1 RBM negative
    log-likelihood, trained jointly from scratch.
``EL_DBN`` / ``EL_DBNOPT``
    expected classification loss over the top layer's binary states, with the
    DBN parameters boxed around the pretrained (resp. two-phase) solution.
``FFN_DBN`` / ``FFN_DBNOPT``
    ordinary fine-tuning loss with the same two boxes.
``BL``
    bilevel model relaxed to a quadratic penalty ``mu/2 * sum_i ||g_i||^2`` on
    each layer's RBM likelihood gradient.

All strategies use plain minibatch SGD. Every random draw comes from a named
sub-stream of the caller's :class:`~dbnclass.numerics.RngStream`, keyed by
epoch and batch, so runs are bitwise reproducible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .classifier import (
    ClassifierParams,
    LabeledDataset,
    Net,
    NetGrad,
    backprop_stack,
    backward_batch,
    batch_losses,
    error_rate,
)
from .dbn import DbnParams, init_dbn, propagate
from .hyper import Hyper, RunHistory
from .numerics import log_sigmoid, logsumexp, softmax
from .rbm import (
    RbmGrad,
    RbmParams,
    all_binary_states,
    cd_k_grad,
    exact_log_px,
    exact_nll_grad,
    reconstruction_cross_entropy,
)

EL_ENUM_GUARD = 20


class StrategyId(str, enum.Enum):
    DBN_FFN = "DBN_FFN"
    DBN_PLUS_LOSS = "DBN_PLUS_LOSS"
    EL_DBN = "EL_DBN"
    EL_DBNOPT = "EL_DBNOPT"
    FFN_DBN = "FFN_DBN"
    FFN_DBNOPT = "FFN_DBNOPT"
    BL = "BL"


NEEDS_PRETRAINED = {StrategyId.DBN_FFN, StrategyId.EL_DBN, StrategyId.FFN_DBN}
NEEDS_TWO_PHASE = {StrategyId.EL_DBNOPT, StrategyId.FFN_DBNOPT}
BOXED = {StrategyId.EL_DBN, StrategyId.EL_DBNOPT, StrategyId.FFN_DBN, StrategyId.FFN_DBNOPT}
EXPECTED_LOSS = {StrategyId.EL_DBN, StrategyId.EL_DBNOPT}


class MissingPrerequisiteError(ValueError):
    """A strategy was asked to train without the snapshot it is defined relative to."""


@dataclass(frozen=True)
class Schedule:
    """Harmonic decay ``v0 / (1 + decay * t)``."""

    v0: float
    decay: float = 0.1

    def __post_init__(self):
        if self.v0 < 0 or self.decay < 0:
            raise ValueError("schedule parameters must be nonnegative")

    def value(self, t):
        return self.v0 / (1.0 + self.decay * t)


@dataclass
class BoxConstraint:
    reference: np.ndarray
    radius: float

    def __post_init__(self):
        self.reference = np.asarray(self.reference, dtype=np.float64).copy()
        if not self.radius >= 0:
            raise ValueError("box radius must be nonnegative")

    def max_violation(self, theta):
        """``max |theta - ref| - radius``; nonpositive when feasible."""
        return float(np.max(np.abs(np.asarray(theta) - self.reference)) - self.radius)


def box_project(theta, box):
    """Clamp ``theta`` elementwise into ``[ref - radius, ref + radius]``.

    Rounding in ``ref +/- radius`` can leave ``|theta - ref|`` one ulp above the
    radius, so offending entries are stepped toward the reference until the
    check holds in floating point.
    """
    theta = np.asarray(theta, dtype=np.float64)
    ref = box.reference
    if theta.shape != ref.shape:
        raise ValueError(f"shape mismatch: {theta.shape} vs box {ref.shape}")
    r = box.radius
    if math.isinf(r):
        return theta.copy()
    out = np.clip(theta, ref - r, ref + r)
    bad = np.abs(out - ref) > r
    while np.any(bad):
        out[bad] = np.nextafter(out[bad], ref[bad])
        bad = np.abs(out - ref) > r
    return out


@dataclass
class Splits:
    train: LabeledDataset
    valid: LabeledDataset
    test: LabeledDataset


@dataclass
class TrainedModel:
    net: Net
    strategy: StrategyId
    hyper: Hyper
    history: RunHistory
    best: Net = None  # snapshot at the lowest validation error
    best_epoch: int = -1
    extra: dict = field(default_factory=dict)

    @property
    def dbn(self):
        return self.net.dbn

    @property
    def clf(self):
        return self.net.clf


def _zero_clf(dbn, n_classes):
    return ClassifierParams.zeros(dbn.layers[-1].n_hidden, n_classes)


def _grad_from_flat(p, v):
    nw = p.W.size
    return RbmGrad(v[:nw].reshape(p.W.shape), v[nw : nw + p.n_visible], v[nw + p.n_visible :])


# ----------------------------------------------------------------------------
# objectives


def objective_two_phase(net, X, y):
    """Mean softmax NLL on propagated features."""
    return float(np.mean(batch_losses(net.clf, propagate(net.dbn, X)[-1], y)))


def dbn_plus_loss_grad(net, X, y, rho, rng=None, k=1, exact=False):
    """Gradient of ``mean L + rho * mean(-log p(x))``; returns ``(mean L, grad)``.

    The likelihood term lives on the layer-1 RBM only. Its gradient is the
    CD-k estimate, or the enumerated one when ``exact``. At ``rho == 0`` the
    likelihood term is skipped entirely.
    """
    loss, g = backward_batch(net, X, y)
    if rho > 0:
        l0 = net.dbn.layers[0]
        gl = exact_nll_grad(l0, X) if exact else cd_k_grad(l0, X, k, rng)
        g.layers[0] = g.layers[0] + gl.scaled(rho)
    return loss, g


def objective_dbn_plus_loss(net, X, y, rho, rng=None, k=1, exact=True):
    """Value ``mean L + rho * mean(-log p_1(x))`` and its gradient.

    The value needs an enumerable first layer; the gradient is exact by
    default and CD-k when ``exact=False``.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    loss, g = dbn_plus_loss_grad(net, X, y, rho, rng=rng, k=k, exact=exact)
    if rho == 0:
        return loss, g
    X = np.atleast_2d(X)
    nll = -np.mean([exact_log_px(net.dbn.layers[0], x) for x in X])
    return loss + rho * nll, g


def _softmax_nll_rows(Z, y):
    """``lse(Z) - Z[..., y]`` where ``y`` broadcasts against the leading axes."""
    return logsumexp(Z, axis=-1) - np.take_along_axis(Z, y[..., None], axis=-1)[..., 0]


def expected_loss(net, X, y, mode="enum", n_samples=None, rng=None):
    """Expected softmax NLL over binary top-layer states; returns ``(mean value, NetGrad)``.

    The top layer is an independent-Bernoulli product with means
    ``m = sigmoid(c_l + W_l mu^{l-1})``. The gradient w.r.t. ``m_i`` is
    ``E[L | h_i = 1] - E[L | h_i = 0]``: exact in ``"enum"`` mode, estimated
    from the same samples with bit ``i`` forced to 1 and to 0 in ``"mc"`` mode.
    It is then backpropagated through the whole stack.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    N = X.shape[0]
    acts = propagate(net.dbn, X)
    m = acts[-1]
    I = m.shape[1]
    U, d = net.clf.U, net.clf.d
    onehot = np.zeros((N, net.clf.n_classes))
    onehot[np.arange(N), y] = 1.0

    if mode == "enum":
        if I > EL_ENUM_GUARD:
            raise ValueError(f"enumerating 2**{I} top states exceeds the guard 2**{EL_ENUM_GUARD}")
        top = net.dbn.layers[-1]
        below = acts[-2] if len(acts) > 1 else X
        a = below @ top.W.T + top.c
        Hs = all_binary_states(I)
        Z = Hs @ U.T + d  # (2^I, C)
        L = logsumexp(Z, axis=1)[None, :] - Z[:, y].T  # (N, 2^I)
        logP = log_sigmoid(a) @ Hs.T + log_sigmoid(-a) @ (1.0 - Hs).T
        P = np.exp(logP)
        value = float(np.mean(np.sum(P * L, axis=1)))
        A = softmax(Z, axis=1)
        Pbar = P.sum(axis=0)
        dU = ((A * Pbar[:, None]).T @ Hs - onehot.T @ (P @ Hs)) / N
        dd = (Pbar @ A - onehot.sum(axis=0)) / N
        idx = np.arange(2**I)
        bits = 1 << (I - 1 - np.arange(I))
        on = idx[:, None] | bits[None, :]
        off = idx[:, None] & ~bits[None, :]
        dm = np.einsum("ns,nsi->ni", P, L[:, on] - L[:, off])
    elif mode == "mc":
        if n_samples is None or n_samples < 1:
            raise ValueError("mc mode needs n_samples >= 1")
        if rng is None:
            raise ValueError("mc mode needs an rng")
        S = int(n_samples)
        H = (rng.uniform((N, S, I)) < m[:, None, :]).astype(np.float64)
        Z = H @ U.T + d  # (N, S, C)
        ys = np.broadcast_to(y[:, None], (N, S))
        L = _softmax_nll_rows(Z, ys)
        value = float(np.mean(L))
        G = softmax(Z, axis=-1) - onehot[:, None, :]
        dU = np.einsum("nsc,nsi->ci", G, H) / (N * S)
        dd = G.sum(axis=(0, 1)) / (N * S)
        UT = U.T[None, None, :, :]  # (1, 1, I, C)
        Z1 = Z[:, :, None, :] + (1.0 - H)[..., None] * UT
        Z0 = Z[:, :, None, :] - H[..., None] * UT
        yi = np.broadcast_to(y[:, None, None], (N, S, I))
        dm = np.mean(_softmax_nll_rows(Z1, yi) - _softmax_nll_rows(Z0, yi), axis=1)
    else:
        raise ValueError(f"unknown expected-loss mode {mode!r}")

    layers = backprop_stack(net.dbn, X, acts, dm / N)
    return value, NetGrad(layers, dU, dd)


def _layer_inputs(net, X):
    acts = propagate(net.dbn, X)
    return [np.atleast_2d(X)] + acts[:-1]


def bl_penalty_terms(dbn, layer_inputs, mu, hvp_mode="exact", rng=None, k=1):
    """Per-layer lower-level penalty.

    Returns ``(sum_i ||g_i||^2, [mu * H_i g_i as RbmGrad])`` where ``g_i`` is
    the mean NLL gradient of layer ``i``'s RBM on its own inputs. Cross-layer
    second-order terms are dropped.
    """
    sq, grads = 0.0, []
    for i, (layer, Xi) in enumerate(zip(dbn.layers, layer_inputs)):
        if hvp_mode == "exact":
            g = exact_nll_grad(layer, Xi).flatten()
            hv = oracle.mean_rbm_hessian(layer, Xi) @ g
        elif hvp_mode == "fd_cd":
            if rng is None:
                raise ValueError("fd_cd mode needs an rng")
            srng = lambda: rng.child("bl", i)
            g = cd_k_grad(layer, Xi, k, srng()).flatten()
            theta = layer.flatten()
            eps = 1e-3 * (1.0 + np.max(np.abs(theta))) / (1.0 + np.max(np.abs(g)))
            J, I = layer.n_visible, layer.n_hidden
            gp = cd_k_grad(RbmParams.from_flat(theta + eps * g, J, I), Xi, k, srng()).flatten()
            gm = cd_k_grad(RbmParams.from_flat(theta - eps * g, J, I), Xi, k, srng()).flatten()
            hv = (gp - gm) / (2.0 * eps)
        else:
            raise ValueError(f"unknown hvp_mode {hvp_mode!r}")
        sq += float(g @ g)
        grads.append(_grad_from_flat(layer, mu * hv))
    return sq, grads


def _bl_grad(net, X, y, mu, hvp_mode, rng, k):
    loss, g = backward_batch(net, X, y)
    if mu == 0:
        return loss, g, 0.0
    sq, pen = bl_penalty_terms(net.dbn, _layer_inputs(net, X), mu, hvp_mode, rng, k)
    g.layers = [a + b for a, b in zip(g.layers, pen)]
    return loss, g, sq


def bl_penalty(net, X, y, mu, hvp_mode="exact", rng=None, k=1):
    """Bilevel objective ``mean L + mu/2 * sum_i ||g_i||^2`` and its gradient.

    Returns ``(value, NetGrad, sum_i ||g_i||^2)``. With ``mu == 0`` nothing
    beyond the fine-tuning gradient is computed.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    loss, g, sq = _bl_grad(net, X, y, mu, hvp_mode, rng, k)
    return loss + 0.5 * mu * sq, g, sq


# ----------------------------------------------------------------------------
# training


def _sgd_step(net, g, lr):
    layers = [
        RbmParams(l.W - lr * gl.dW, l.b - lr * gl.db, l.c - lr * gl.dc)
        for l, gl in zip(net.dbn.layers, g.layers)
    ]
    clf = ClassifierParams(net.clf.U - lr * g.dU, net.clf.d - lr * g.dd)
    return Net(DbnParams(layers), clf)


def _apply_box(net, box):
    flat = box_project(net.dbn.flatten(), box)
    return Net(DbnParams.from_flat(flat, net.dbn.sizes), net.clf)


def _el_mode(hyper, n_top):
    if hyper.el_mode == "auto":
        return "enum" if n_top <= hyper.el_enum_max_units else "mc"
    return hyper.el_mode


def resolve_start(strategy, n_classes, rng, sizes=None, pretrained=None, two_phase=None, init=None):
    """Starting network and box reference for ``strategy``."""
    strategy = StrategyId(strategy)
    box_ref = None
    if strategy in NEEDS_PRETRAINED:
        if pretrained is None:
            raise MissingPrerequisiteError(f"{strategy.value} needs a pretrained DBN")
        start = Net(pretrained.copy(), _zero_clf(pretrained, n_classes))
        box_ref = pretrained.flatten()
    elif strategy in NEEDS_TWO_PHASE:
        if two_phase is None:
            raise MissingPrerequisiteError(f"{strategy.value} needs a two-phase snapshot")
        start = two_phase.copy()
        box_ref = two_phase.dbn.flatten()
    else:
        if init is None and sizes is None:
            raise ValueError(f"{strategy.value} needs layer sizes or an initial network")
        if init is None:
            dbn = init_dbn(sizes, rng.child("init"))
            start = Net(dbn, _zero_clf(dbn, n_classes))
    if init is not None:
        start = init.copy()
    return start, box_ref


def train(strategy, splits, hyper, rng, *, sizes=None, pretrained=None, two_phase=None, init=None,
          history=None, on_epoch=None):
    """Fit one strategy with minibatch SGD.

    ``pretrained`` (a :class:`DbnParams`) is required by DBN_FFN, EL_DBN and
    FFN_DBN; ``two_phase`` (a :class:`Net`) by the two ``*OPT`` variants.
    DBN_PLUS_LOSS and BL start from a fresh initialisation of ``sizes``.
    ``init`` overrides the starting network for any strategy.
    ``on_epoch(t, net)`` is called after every epoch.
    """
    strategy = StrategyId(strategy)
    n_classes = splits.train.n_classes
    net, box_ref = resolve_start(strategy, n_classes, rng, sizes, pretrained, two_phase, init)
    box = BoxConstraint(box_ref, hyper.delta) if strategy in BOXED else None
    if box is not None:
        net = _apply_box(net, box)
    history = history if history is not None else RunHistory()
    rho = Schedule(hyper.rho0, hyper.decay)
    mu = Schedule(hyper.mu0, hyper.decay)
    el_mode = _el_mode(hyper, net.dbn.layers[-1].n_hidden)

    Xtr, ytr = splits.train.inputs, splits.train.labels
    n = len(splits.train)
    if n == 0:
        raise ValueError("empty training split")
    bs = hyper.batch_size

    def select_error(model):
        if len(splits.valid):
            return error_rate(model, splits.valid)
        return error_rate(model, splits.train)

    best, best_epoch, best_err = net.copy(), -1, select_error(net)
    for t in range(hyper.finetune_epochs):
        erng = rng.child("finetune", t)
        order = erng.child("shuffle").permutation(n)
        obj, pen = [], []
        for b, start in enumerate(range(0, n, bs)):
            idx = order[start : start + bs]
            X, y = Xtr[idx], ytr[idx]
            brng = erng.child("batch", b)
            if strategy in EXPECTED_LOSS:
                v, g = expected_loss(net, X, y, el_mode, hyper.mc_samples, brng)
                p = 0.0
            elif strategy is StrategyId.DBN_PLUS_LOSS:
                r = rho.value(t)
                v, g = dbn_plus_loss_grad(net, X, y, r, brng, hyper.cd_k)
                p = 0.0  # filled per epoch below
            elif strategy is StrategyId.BL:
                v, g, p = _bl_grad(net, X, y, mu.value(t), hyper.hvp_mode, brng, hyper.cd_k)
            else:
                v, g = backward_batch(net, X, y)
                p = 0.0
            net = _sgd_step(net, g, hyper.finetune_lr)
            if box is not None:
                net = _apply_box(net, box)
            obj.append(v)
            pen.append(p)
        history.objective.append(float(np.mean(obj)))
        if strategy is StrategyId.DBN_PLUS_LOSS and rho.value(t) > 0:
            history.penalty.append(reconstruction_cross_entropy(net.dbn.layers[0], Xtr))
        else:
            history.penalty.append(float(np.mean(pen)))
        history.train_error.append(error_rate(net, splits.train))
        history.valid_error.append(error_rate(net, splits.valid))
        history.test_error.append(error_rate(net, splits.test))
        err = history.valid_error[-1] if len(splits.valid) else history.train_error[-1]
        if err < best_err:
            best, best_epoch, best_err = net.copy(), t, err
        if on_epoch is not None:
            on_epoch(t, net)

    model = TrainedModel(net, strategy, hyper, history, best, best_epoch)
    if box is not None:
        model.extra["box_reference"] = box.reference
    return model


def train_el_variants(variant, splits, hyper, rng, *, pretrained=None, two_phase=None, **kw):
    variant = StrategyId(variant)
    if variant not in EXPECTED_LOSS:
        raise ValueError(f"{variant.value} is not an expected-loss variant")
    return train(variant, splits, hyper, rng, pretrained=pretrained, two_phase=two_phase, **kw)


def train_ffn_variants(variant, splits, hyper, rng, *, pretrained=None, two_phase=None, **kw):
    variant = StrategyId(variant)
    if variant not in (StrategyId.FFN_DBN, StrategyId.FFN_DBNOPT):
        raise ValueError(f"{variant.value} is not a boxed feed-forward variant")
    return train(variant, splits, hyper, rng, pretrained=pretrained, two_phase=two_phase, **kw)
