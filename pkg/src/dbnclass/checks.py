"""Quick production-vs-oracle agreement checks, run by ``dbnclass oracle-check``."""

from __future__ import annotations

import numpy as np

from . import oracle
from .classifier import ClassifierParams, Net, backward_batch
from .dbn import DbnParams
from .numerics import RngStream
from .rbm import RbmParams, exact_log_px, exact_nll_grad
from .strategies import bl_penalty, expected_loss


def _random_rbm(gen, J, I, scale):
    return RbmParams(gen.normal(0, scale, (I, J)), gen.normal(0, scale, J), gen.normal(0, scale, I))


def _random_net(gen, sizes, n_classes, scale=0.5):
    layers = [_random_rbm(gen, J, I, scale) for J, I in zip(sizes[:-1], sizes[1:])]
    clf = ClassifierParams(gen.normal(0, scale, (n_classes, sizes[-1])), gen.normal(0, scale, n_classes))
    return Net(DbnParams(layers), clf)


def check_nll_gradient(gen):
    p = _random_rbm(gen, 6, 4, 0.1)
    x = (gen.random(6) < 0.5).astype(float)
    f = lambda th: -exact_log_px(RbmParams.from_flat(th, 6, 4), x)
    return oracle.max_relative_error(exact_nll_grad(p, x).flatten(), oracle.fd_gradient(f, p.flatten())), 1e-6


def check_hessian(gen):
    p = _random_rbm(gen, 4, 3, 0.5)
    x = (gen.random(4) < 0.5).astype(float)
    H = oracle.exact_rbm_hessian(p, x)
    jac = oracle.fd_jacobian(lambda th: exact_nll_grad(RbmParams.from_flat(th, 4, 3), x).flatten(), p.flatten())
    return float(np.max(np.abs(H - jac))), 1e-5


def check_backprop(gen):
    net = _random_net(gen, [6, 5, 4], 3)
    X = gen.random((3, 6))
    y = gen.integers(0, 3, 3)
    f = lambda th: backward_batch(net.unflatten(th), X, y)[0]
    g = backward_batch(net, X, y)[1].flatten()
    return oracle.max_relative_error(g, oracle.fd_gradient(f, net.flatten())), 1e-6


def check_expected_loss(gen):
    net = _random_net(gen, [5, 6], 3)
    x = gen.random(5)
    v, g = expected_loss(net, x[None], [1], "enum")
    ref = oracle.enumerate_expected_loss(net, x, 1)
    fd = oracle.fd_gradient(lambda th: expected_loss(net.unflatten(th), x[None], [1], "enum")[0], net.flatten())
    return max(abs(v - ref) / abs(ref), oracle.max_relative_error(g.flatten(), fd)), 1e-6


def check_bl_penalty(gen):
    net = _random_net(gen, [4, 3], 2)
    X = (gen.random((3, 4)) < 0.5).astype(float)
    y = np.array([0, 1, 0])
    mu = 0.7
    _, g, _ = bl_penalty(net, X, y, mu, "exact")
    f = lambda th: bl_penalty(net.unflatten(th), X, y, mu, "exact")[0]
    return oracle.max_relative_error(g.flatten(), oracle.fd_gradient(f, net.flatten())), 1e-4


CHECKS = {
    "rbm-nll-gradient": check_nll_gradient,
    "rbm-hessian": check_hessian,
    "backprop": check_backprop,
    "expected-loss": check_expected_loss,
    "bl-penalty-gradient": check_bl_penalty,
}


def run_checks(seed=0):
    """Run every check; returns ``[(name, error, tolerance, passed)]``."""
    results = []
    for i, (name, fn) in enumerate(CHECKS.items()):
        gen = RngStream(seed).child("oracle-check", i).generator
        err, tol = fn(gen)
        results.append((name, err, tol, err <= tol))
    return results
