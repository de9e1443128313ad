"""
Checking an RBM against brute force
===================================

A restricted Boltzmann machine small enough to enumerate lets us compare
every analytic quantity with a direct sum over all states.
"""

import numpy as np

from dbnclass import oracle
from dbnclass.numerics import RngStream
from dbnclass.rbm import RbmParams, cd_k_grad, exact_log_px, exact_nll_grad, exact_partition

gen = np.random.default_rng(0)
J, I = 6, 4
p = RbmParams(gen.normal(0, 0.5, (I, J)), gen.normal(0, 0.5, J), gen.normal(0, 0.5, I))

# log Z two ways: free energy over x only, and the full joint over (x, h)
print("log Z (free energy) :", exact_partition(p))
print("log Z (joint table) :", oracle.brute_log_partition(p.W, p.b, p.c))

# the likelihood gradient against central differences
x = (gen.random(J) < 0.5).astype(float)
f = lambda th: -exact_log_px(RbmParams.from_flat(th, J, I), x)
fd = oracle.fd_gradient(f, p.flatten())
print("gradient rel. error :", oracle.max_relative_error(exact_nll_grad(p, x).flatten(), fd))

# CD-k drifts toward the exact gradient as the chain gets longer
X = np.repeat(x[None, :], 50_000, axis=0)
exact = exact_nll_grad(p, x).flatten()
for k in (1, 5, 25):
    g = cd_k_grad(p, X, k, RngStream(1, k)).flatten()
    print(f"CD-{k:<2} max abs bias  :", np.max(np.abs(g - exact)))

# second derivatives: enumeration Hessian vs a Jacobian of the gradient
q = RbmParams.from_flat(p.flatten()[: 3 * 4 + 4 + 3], 4, 3)
y = x[:4]
H = oracle.exact_rbm_hessian(q, y)
jac = oracle.fd_jacobian(lambda th: exact_nll_grad(RbmParams.from_flat(th, 4, 3), y).flatten(), q.flatten())
print("Hessian max abs err :", np.max(np.abs(H - jac)))
