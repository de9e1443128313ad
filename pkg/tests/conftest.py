import numpy as np
import pytest

from dbnclass.classifier import ClassifierParams, Net
from dbnclass.dbn import DbnParams
from dbnclass.rbm import RbmParams

ACCEPTANCE_LINES = []


def random_rbm(gen, J, I, scale=0.5):
    return RbmParams(gen.normal(0, scale, (I, J)), gen.normal(0, scale, J), gen.normal(0, scale, I))


def random_net(gen, sizes, n_classes, scale=0.5):
    layers = [random_rbm(gen, J, I, scale) for J, I in zip(sizes[:-1], sizes[1:])]
    clf = ClassifierParams(gen.normal(0, scale, (n_classes, sizes[-1])), gen.normal(0, scale, n_classes))
    return Net(DbnParams(layers), clf)


def binary(gen, shape):
    return (gen.random(shape) < 0.5).astype(float)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
