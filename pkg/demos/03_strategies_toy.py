"""
Seven ways to train the same network
====================================

Every strategy is run on one toy problem with shared seeds. The boxed
variants report how far the stack moved from its reference.
"""

import numpy as np

from dbnclass.classifier import LabeledDataset
from dbnclass.dbn import pretrain_layerwise
from dbnclass.hyper import Hyper
from dbnclass.numerics import RngStream
from dbnclass.strategies import Splits, StrategyId, train

gen = np.random.default_rng(5)
X = (gen.random((300, 10)) < 0.5).astype(float)
y = (X[:, 0] + X[:, 1] + X[:, 2] >= 2).astype(int) + (X[:, 3] > 0.5) * (X[:, 4] > 0.5)
splits = Splits(
    LabeledDataset(X[:200], y[:200], 3),
    LabeledDataset(X[200:250], y[200:250], 3),
    LabeledDataset(X[250:], y[250:], 3),
)
sizes = [10, 8, 6]
hyper = Hyper(pretrain_epochs=10, pretrain_lr=0.05, finetune_epochs=40, finetune_lr=0.3,
              batch_size=10, delta=0.2, mu0=0.01)

pre = pretrain_layerwise(sizes, splits.train.inputs, hyper, RngStream(0).child("pretrain"))
two = train(StrategyId.DBN_FFN, splits, hyper, RngStream(0).child("ffn"), pretrained=pre)

for s in StrategyId:
    m = two if s is StrategyId.DBN_FFN else train(
        s, splits, hyper, RngStream(0).child(s.value), sizes=sizes, pretrained=pre, two_phase=two.best)
    test_err = m.history.test_error[m.best_epoch] if m.best_epoch >= 0 else float("nan")
    line = f"{s.value:<14} best epoch {m.best_epoch:>3}  test error {test_err:.3f}"
    if "box_reference" in m.extra:
        moved = np.max(np.abs(m.net.dbn.flatten() - m.extra["box_reference"]))
        line += f"  max |theta - ref| {moved:.3f}"
    print(line)
