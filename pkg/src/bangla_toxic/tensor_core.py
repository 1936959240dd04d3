"""Dense float64 matrix helpers, activations and a seeded RNG.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The helpers
here add the shape checks and numeric guards the rest of the package relies
on; hot loops call numpy directly.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError, ShapeError

DTYPE = np.float64

# Arguments beyond this magnitude saturate; keeps exp() finite.
SIGMOID_CLAMP = 500.0
# Largest float64 strictly below 1.0.
ONE_MINUS = float(np.nextafter(1.0, 0.0))


class SeededRng:
    """Deterministic random stream (numpy PCG64) keyed by a 64-bit seed.

    Derived streams from :meth:`derive` are independent of the parent's
    consumption state, so fold ``k`` of a run always sees the same draws.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def derive(self, *keys: int) -> "SeededRng":
        child = SeededRng.__new__(SeededRng)
        child.seed = self.seed
        ss = np.random.SeedSequence([self.seed, *[int(k) for k in keys]])
        child._gen = np.random.Generator(np.random.PCG64(ss))
        return child

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, seq, size=None):
        idx = self._gen.integers(0, len(seq), size)
        if size is None:
            return seq[int(idx)]
        return [seq[int(i)] for i in idx]


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.array(values, dtype=DTYPE)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {m.ndim}-D")
    if rows is not None and cols is not None and m.shape != (rows, cols):
        raise ShapeError(f"expected shape {(rows, cols)}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix contains non-finite values")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def sigmoid(x):
    """Logistic function, overflow-free, output kept strictly inside (0, 1)."""
    x = np.clip(np.asarray(x, dtype=DTYPE), -SIGMOID_CLAMP, SIGMOID_CLAMP)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.minimum(out, ONE_MINUS)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=DTYPE))


def relu(x):
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
_BINARY = {"add": np.add, "mul": np.multiply}


def elementwise(op: str, *args) -> np.ndarray:
    """Apply ``sigmoid|tanh|relu`` to one matrix or ``add|mul`` to two."""
    arrs = [np.asarray(a, dtype=DTYPE) for a in args]
    if op in _UNARY:
        if len(arrs) != 1:
            raise ValueError(f"{op} takes exactly one argument")
        return _UNARY[op](arrs[0])
    if op in _BINARY:
        if len(arrs) != 2:
            raise ValueError(f"{op} takes exactly two arguments")
        if arrs[0].shape != arrs[1].shape:
            raise ShapeError(f"{op}: shape mismatch {arrs[0].shape} vs {arrs[1].shape}")
        return _BINARY[op](arrs[0], arrs[1])
    raise ValueError(f"unknown elementwise op {op!r}")


def uniform_init(rows: int, cols: int, scale: float, rng: SeededRng) -> np.ndarray:
    if rows <= 0 or cols <= 0:
        raise ShapeError(f"non-positive dimensions ({rows}, {cols})")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return rng.uniform(-scale, scale, (rows, cols)).astype(DTYPE)


def finite_difference_grad(
    f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-4
) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=DTYPE)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"f is non-finite near element {i}")
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad
