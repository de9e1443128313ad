import math

import numpy as np
import pytest

from dbnclass import oracle
from dbnclass.rbm import RbmParams, exact_nll_grad

from conftest import binary, random_net, random_rbm


def test_fd_gradient_of_quadratic():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    g = oracle.fd_gradient(lambda t: 0.5 * t @ A @ t, np.array([1.0, -2.0]))
    np.testing.assert_allclose(g, A @ [1.0, -2.0], atol=1e-9)


def test_fd_spec_validation():
    with pytest.raises(ValueError):
        oracle.FdSpec(eps=1.0)
    with pytest.raises(ValueError):
        oracle.FdSpec(scheme="forward")


def test_fd_rejects_non_finite():
    with pytest.raises(oracle.OracleError):
        oracle.fd_gradient(lambda t: math.inf, np.zeros(2))


def test_relative_error_is_normwise():
    assert oracle.max_relative_error([1.0, 1e-12], [1.0, 2e-12]) == pytest.approx(1e-12)
    assert oracle.max_relative_error([0.0], [0.0]) == 0.0


def test_enumeration_guard():
    p = RbmParams.zeros(15, 6)
    with pytest.raises(oracle.OracleError):
        oracle.brute_log_partition(p.W, p.b, p.c)


def test_hessian_at_zero_parameters():
    # W = 0: x and h are independent fair coins under the model. For the
    # w_00 statistic h_0 x_0 with x = 1: model variance 1/4 - 1/16 = 3/16,
    # conditional variance of h_0 is 1/4, so the diagonal entry is -1/16.
    p = RbmParams.zeros(2, 2)
    H = oracle.exact_rbm_hessian(p, [1.0, 1.0])
    assert H[0, 0] == pytest.approx(-1 / 16, abs=1e-14)
    # the b block only sees the model covariance of x
    nw = 4
    assert H[nw, nw] == pytest.approx(0.25, abs=1e-14)


def test_hessian_is_jacobian_of_gradient(gen):
    p = random_rbm(gen, 4, 3)
    x = binary(gen, 4)
    jac = oracle.fd_jacobian(lambda th: exact_nll_grad(RbmParams.from_flat(th, 4, 3), x).flatten(), p.flatten())
    assert np.max(np.abs(oracle.exact_rbm_hessian(p, x) - jac)) <= 1e-7


def test_closed_form_entries_match(gen):
    p = random_rbm(gen, 4, 3)
    x = binary(gen, 4)
    H = oracle.exact_rbm_hessian(p, x)
    for first, second in [((0, 0), (0, 0)), ((1, 2), (1, 3)), ((0, 1), (2, 3))]:
        got = oracle.closed_form_w_hessian_entry(p, x, first, second)
        assert got == pytest.approx(H[first[0] * 4 + first[1], second[0] * 4 + second[1]], abs=1e-10)


def test_expected_loss_two_point_case():
    # One top unit with P(h=1) = 0.6; losses 0.5 (h=0) and 1 (h=1) give 0.7.
    net = random_net(np.random.default_rng(0), [1, 1], 2)
    net.dbn.layers[0].W[:] = 0.0
    net.dbn.layers[0].c[:] = math.log(1.5)
    net.clf.d[:] = [-math.log(math.e - 1), 0.0]
    net.clf.U[:, 0] = [math.log(math.e - 1) - math.log(math.exp(0.5) - 1), 0.0]
    value, w = oracle.enumerate_expected_loss(net, [0.0], 0, return_weights=True)
    np.testing.assert_allclose(w, [0.4, 0.6])
    assert value == pytest.approx(0.7, abs=1e-14)


def test_fd_trivial_cases(gen):
    th = gen.normal(size=5)
    np.testing.assert_allclose(oracle.fd_gradient(lambda t: t @ t, th), 2 * th, rtol=1e-8)
    assert not oracle.fd_gradient(lambda t: 3.0, th).any()


def test_fd_matches_negated_analytic_gradient(gen):
    from dbnclass.rbm import exact_log_px

    p = random_rbm(gen, 3, 2)
    x = binary(gen, 3)
    fd = oracle.fd_gradient(lambda th: exact_log_px(RbmParams.from_flat(th, 3, 2), x), p.flatten())
    assert oracle.max_relative_error(fd, -exact_nll_grad(p, x).flatten()) <= 1e-6


def test_closed_form_at_symmetric_point():
    p = RbmParams.zeros(2, 2)
    assert oracle.closed_form_w_hessian_entry(p, [1.0, 1.0], (0, 0), (0, 0)) == pytest.approx(-1 / 16, abs=1e-15)


def test_enumeration_weights_normalised(gen):
    net = random_net(gen, [4, 6], 3, 1.0)
    _, w = oracle.enumerate_expected_loss(net, gen.random(4), 1, return_weights=True)
    assert abs(w.sum() - 1.0) <= 1e-12
