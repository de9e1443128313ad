"""
Greedy pretraining of a small DBN
=================================

Two noisy binary prototypes, a 16-8-4 stack, and the reconstruction
cross-entropy of each layer as pretraining proceeds.
"""

import numpy as np

from dbnclass.dbn import pretrain_layerwise, propagate
from dbnclass.hyper import Hyper, RunHistory
from dbnclass.numerics import RngStream

gen = np.random.default_rng(3)
protos = (gen.random((2, 16)) < 0.5).astype(float)
labels = gen.integers(0, 2, 400)
X = protos[labels]
X = np.where(gen.random(X.shape) < 0.05, 1 - X, X)

hyper = Hyper(pretrain_epochs=15, pretrain_lr=0.1, batch_size=10)
hist = RunHistory()
dbn = pretrain_layerwise([16, 8, 4], X, hyper, RngStream(0), history=hist)

# the history holds 15 entries for layer 1 followed by 15 for layer 2
for k in range(2):
    curve = hist.pretrain_recon[15 * k : 15 * (k + 1)]
    print(f"layer {k + 1}: recon CE {curve[0]:.3f} -> {curve[-1]:.3f}")

# the top-layer means separate the two prototypes without any labels
top = propagate(dbn, X)[-1]
for c in (0, 1):
    print(f"class {c} mean top activation:", np.round(top[labels == c].mean(axis=0), 2))
