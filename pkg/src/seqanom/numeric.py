"""Dense float64 numerics and seeded randomness for the whole toolkit.

All arrays are 2-D (or 1-D where noted) float64 numpy arrays; numpy is the
storage and compute backend. Randomness comes exclusively from
:class:`RngStream`, a thin wrapper over the counter-based Philox4x64-10
bit generator keyed by ``(seed, stream_id)``. Philox is fully specified
and platform-independent, so a fixed seed reproduces every experiment
bit-for-bit; independent parallel streams are obtained by splitting on
``stream_id`` rather than by jumping a shared state.
"""

from __future__ import annotations

import numpy as np

Matrix = np.ndarray

_U64_MASK = (1 << 64) - 1


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Two streams with the same key produce identical draw sequences; streams
    with different keys are statistically independent. A stream is
    single-owner: share the key, not the object.
    """

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self.seed = seed & _U64_MASK
        self.stream_id = stream_id & _U64_MASK
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        )

    def split(self, stream_id: int) -> "RngStream":
        """Child stream derived from this stream's seed and a new stream id."""
        return RngStream(self.seed, stream_id)

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive; advances the stream."""
        if lo > hi:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        return int(self._gen.integers(lo, hi + 1))

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        return self._gen.uniform(lo, hi, size=size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, seq):
        """Uniform element of a non-empty sequence."""
        return seq[self.uniform_int(0, len(seq) - 1)]


def rng_uniform_int(rng: RngStream, lo: int, hi: int) -> int:
    """Uniform integer in [lo, hi] inclusive (function form of the stream op)."""
    return rng.uniform_int(lo, hi)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with dimension and finiteness checks."""
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.isfinite(out).all():
        raise FloatingPointError("matmul produced non-finite entries")
    return out


_ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")


def activation(x: Matrix, kind: str) -> Matrix:
    """Elementwise activation; ``linear`` is the identity."""
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "linear":
        return x
    raise ValueError(f"unknown activation {kind!r}; expected one of {_ACTIVATIONS}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Branch on sign so exp never overflows.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction. Accepts 1-D or 2-D."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_xent(logits: Matrix, target: int) -> tuple[float, Matrix]:
    """Cross-entropy of a 1 x V logits row against a target index.

    Returns ``(loss, grad)`` where ``loss = -log softmax(logits)[target]``
    and ``grad = softmax(logits) - onehot(target)``, both computed from the
    max-shifted logits so arbitrary finite inputs are safe.
    """
    if logits.ndim != 2 or logits.shape[0] != 1:
        raise ValueError(f"expected 1 x V logits, got shape {logits.shape}")
    vocab = logits.shape[1]
    if not 0 <= target < vocab:
        raise ValueError(f"target {target} out of range [0, {vocab})")
    z = logits - np.max(logits)
    log_norm = np.log(np.sum(np.exp(z)))
    loss = float(log_norm - z[0, target])
    grad = np.exp(z - log_norm)
    grad[0, target] -= 1.0
    return loss, grad
