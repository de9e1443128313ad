"""
The bilevel penalty and its gradient
====================================

The lower-level condition says each layer's RBM should sit at a stationary
point of its own likelihood. Penalising ``mu/2 * ||g||^2`` needs ``H g``, the
Hessian times the gradient. Here the enumerated product is compared with
finite differences, and with the finite-difference CD estimate used at scale.
"""

import numpy as np

from dbnclass import oracle
from dbnclass.classifier import ClassifierParams, Net
from dbnclass.dbn import DbnParams
from dbnclass.numerics import RngStream
from dbnclass.rbm import RbmParams, exact_nll_grad
from dbnclass.strategies import bl_penalty_terms

gen = np.random.default_rng(2)
layer = RbmParams(gen.normal(0, 0.5, (3, 4)), gen.normal(0, 0.5, 4), gen.normal(0, 0.5, 3))
X = (gen.random((8, 4)) < 0.5).astype(float)
net = Net(DbnParams([layer]), ClassifierParams.zeros(3, 2))

sq, (hv,) = bl_penalty_terms(net.dbn, [X], 1.0, "exact")
print("sum ||g||^2        :", sq)


def half_sq(theta):
    g = exact_nll_grad(RbmParams.from_flat(theta, 4, 3), X).flatten()
    return 0.5 * g @ g


fd = oracle.fd_gradient(half_sq, layer.flatten())
print("H g vs FD rel err  :", oracle.max_relative_error(hv.flatten(), fd))

# The CD version differences two CD gradients that share random numbers,
# so it is noisy but unbiased in its own right. Many chains shrink the noise.
big = np.repeat(X, 5000, axis=0)
_, (hv_cd,) = bl_penalty_terms(net.dbn, [big], 1.0, "fd_cd", RngStream(0), k=10)
print("H g via CD rel err :", oracle.max_relative_error(hv_cd.flatten(), hv.flatten()))
