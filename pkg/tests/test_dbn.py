import math

import numpy as np
import pytest

from dbnclass.dbn import DbnParams, init_dbn, log_px_approx, pretrain_layerwise, propagate, top_conditional
from dbnclass.hyper import Hyper, RunHistory
from dbnclass.numerics import RngStream
from dbnclass.rbm import RbmParams, exact_log_px

from conftest import binary


def test_propagate_example():
    l1 = RbmParams([[math.log(3)]], [0.0], [0.0])
    l2 = RbmParams([[0.0]], [0.0], [0.0])
    acts = propagate(DbnParams([l1, l2]), [1.0])
    assert acts[0][0] == pytest.approx(0.75)
    assert acts[1][0] == 0.5


def test_propagate_zero_stack_and_width_check():
    d = DbnParams([RbmParams.zeros(5, 4), RbmParams.zeros(4, 3)])
    acts = propagate(d, np.ones(5))
    np.testing.assert_array_equal(acts[-1], [0.5] * 3)
    with pytest.raises(ValueError):
        propagate(d, np.ones(4))


def test_top_conditional_matches_top_means(gen):
    d = init_dbn([6, 5, 3], RngStream(0))
    x = binary(gen, 6)
    np.testing.assert_array_equal(top_conditional(d, x), propagate(d, x)[-1])


def test_stack_must_chain():
    with pytest.raises(ValueError):
        DbnParams([RbmParams.zeros(5, 4), RbmParams.zeros(3, 2)])


def test_flat_round_trip():
    d = init_dbn([6, 5, 3], RngStream(2))
    back = DbnParams.from_flat(d.flatten(), d.sizes)
    assert back.flatten().tobytes() == d.flatten().tobytes()
    assert d.sizes == [6, 5, 3]


def test_log_px_approx_uses_first_layer(gen):
    d = init_dbn([4, 3, 2], RngStream(1))
    x = binary(gen, 4)
    assert log_px_approx(d, x) == exact_log_px(d.layers[0], x)


def _toy(gen, n=40, J=6):
    return binary(gen, (n, J))


def test_pretraining_reproducible_and_logs_recon(gen):
    X = _toy(gen)
    hyper = Hyper(pretrain_epochs=3, batch_size=8)
    h1, h2 = RunHistory(), RunHistory()
    a = pretrain_layerwise([6, 4, 3], X, hyper, RngStream(5), h1)
    b = pretrain_layerwise([6, 4, 3], X, hyper, RngStream(5), h2)
    assert a.flatten().tobytes() == b.flatten().tobytes()
    assert len(h1.pretrain_recon) == 6 and h1.pretrain_recon == h2.pretrain_recon


def test_lower_layers_do_not_depend_on_upper_layers(gen):
    X = _toy(gen)
    hyper = Hyper(pretrain_epochs=3, batch_size=8)
    one = pretrain_layerwise([6, 4], X, hyper, RngStream(5))
    two = pretrain_layerwise([6, 4, 3], X, hyper, RngStream(5))
    assert one.layers[0].flatten().tobytes() == two.layers[0].flatten().tobytes()


def test_pretraining_lowers_reconstruction_error():
    gen = np.random.default_rng(0)
    protos = binary(gen, (2, 12))
    X = protos[gen.integers(0, 2, 200)]
    flip = gen.random(X.shape) < 0.05
    X = np.where(flip, 1 - X, X)
    hist = RunHistory()
    pretrain_layerwise([12, 6], X, Hyper(pretrain_epochs=20, pretrain_lr=0.1, batch_size=10), RngStream(0), hist)
    assert hist.pretrain_recon[-1] < hist.pretrain_recon[0]


def test_pretraining_width_check(gen):
    with pytest.raises(ValueError):
        pretrain_layerwise([5, 3], _toy(gen), Hyper(pretrain_epochs=1), RngStream(0))


def test_init_dbn_needs_a_hidden_layer():
    with pytest.raises(ValueError):
        init_dbn([5], RngStream(0))


def test_log_px_approx_zero_params():
    d = DbnParams([RbmParams.zeros(2, 3), RbmParams.zeros(3, 2)])
    for x in ([0, 0], [1, 0], [1, 1]):
        assert log_px_approx(d, x) == pytest.approx(math.log(0.25), abs=1e-14)


def test_propagate_lipschitz(gen):
    for _ in range(20):
        d = init_dbn([6, 5, 3], RngStream(int(gen.integers(1 << 30))))
        x = gen.random(6)
        eta = 1e-3
        x2 = x + gen.uniform(-eta, eta, 6)
        W1 = d.layers[0].W
        bound = eta * np.max(np.abs(W1).sum(axis=1)) / 4
        assert np.max(np.abs(propagate(d, x2)[0] - propagate(d, x)[0])) <= bound + 1e-12


def test_top_depends_on_lower_layers_only_through_mu(gen):
    d = init_dbn([6, 5, 3], RngStream(3))
    x = gen.random(6)
    # shift W1 by D and compensate in c1 so that mu^1 at this x is unchanged
    D = gen.normal(size=d.layers[0].W.shape)
    l1 = d.layers[0]
    moved = RbmParams(l1.W + D, l1.b, l1.c - D @ x)
    e = DbnParams([moved, d.layers[1]])
    np.testing.assert_allclose(propagate(e, x)[0], propagate(d, x)[0], atol=1e-13)
    np.testing.assert_allclose(top_conditional(e, x), top_conditional(d, x), atol=1e-13)


def test_layer_one_ignores_layer_two_init(gen):
    X = _toy(gen)
    hyper = Hyper(pretrain_epochs=3, batch_size=8)
    a = init_dbn([6, 4, 3], RngStream(0))
    b = DbnParams([a.layers[0], init_dbn([4, 3], RngStream(99)).layers[0]])
    pa = pretrain_layerwise([6, 4, 3], X, hyper, RngStream(5), init=a)
    pb = pretrain_layerwise([6, 4, 3], X, hyper, RngStream(5), init=b)
    assert pa.layers[0].flatten().tobytes() == pb.layers[0].flatten().tobytes()
    assert pa.layers[1].flatten().tobytes() != pb.layers[1].flatten().tobytes()
