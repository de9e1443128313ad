"""Dense float64 helpers and reproducible random streams.

Matrices are plain 2-D ``float64`` numpy arrays; vectors are 1-D arrays.
Every function here accepts a batch (leading axis) where that makes sense.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import expit, log_expit
from scipy.special import logsumexp as _logsumexp

__all__ = [
    "sigmoid",
    "log_sigmoid",
    "softmax",
    "log_softmax",
    "logsumexp",
    "matmul",
    "as_float_array",
    "RngStream",
]


def as_float_array(a, ndim=None, name="array"):
    """Convert to a finite float64 array, optionally checking dimensionality."""
    arr = np.asarray(a, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def sigmoid(v):
    """Logistic function; saturates to 0/1 without overflow warnings."""
    return expit(np.asarray(v, dtype=np.float64))


def log_sigmoid(v):
    return log_expit(np.asarray(v, dtype=np.float64))


def logsumexp(v, axis=None):
    return _logsumexp(np.asarray(v, dtype=np.float64), axis=axis)


def log_softmax(v, axis=-1):
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0 or v.shape[axis] == 0:
        raise ValueError("softmax of an empty vector is undefined")
    shifted = v - np.max(v, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(v, axis=-1):
    """Max-shifted softmax along ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0 or v.shape[axis] == 0:
        raise ValueError("softmax of an empty vector is undefined")
    e = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def matmul(a, b):
    """Matrix product with an explicit shape check.

    numpy dispatches to BLAS, which is deterministic for a fixed thread count.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """Seeded Philox stream addressed by ``(seed, stream_id, *subkeys)``.

    Two streams built from the same address produce identical draws.
    ``child`` derives named sub-streams (e.g. per layer, epoch, batch) that do
    not depend on how much the parent has been consumed, so training order
    changes elsewhere never perturb them.
    """

    def __init__(self, seed, stream_id=0, _path=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._path = tuple(_path)
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id,) + self._path
        )
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *keys):
        """Independent sub-stream; keys may be ints or strings."""
        path = self._path + tuple(_key_to_int(k) for k in keys)
        return RngStream(self.seed, self.stream_id, path)

    @property
    def generator(self):
        return self._gen

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def bernoulli(self, p):
        """Binary sample with ``P(1) = p`` via ``u < p``."""
        p = np.asarray(p, dtype=np.float64)
        return (self._gen.random(p.shape) < p).astype(np.float64)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"
