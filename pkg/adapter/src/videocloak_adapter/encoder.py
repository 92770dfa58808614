"""Encoders hosted by the adapter process.

MockEncoder is a from-scratch reimplementation of the builtin surrogate:
average-pool by ``pool_factor``, flatten, multiply by a Gaussian matrix
drawn from ``default_rng([seed, K])`` (weights N(0,1)/sqrt(K), bias
0.1 * N(0,1)), then tanh. Keeping the construction identical to the
in-process encoder is the whole point: a client may freely mix embeddings
from either side.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DIM = 256
DEFAULT_POOL_FACTOR = 4


class AdapterError(Exception):
    """Request cannot be served; reported to the client as an ERROR reply."""


class MockEncoder:
    def __init__(self, seed: int = 42, pool_factor: int = DEFAULT_POOL_FACTOR,
                 dim: int = DEFAULT_DIM):
        self.seed = seed
        self.pool_factor = pool_factor
        self.dim = dim
        self.id = f"builtin:{seed}:{pool_factor}:{dim}"
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _pooled(self, frame: np.ndarray) -> np.ndarray:
        h, w = frame.shape[:2]
        pf = self.pool_factor
        if h % pf or w % pf:
            raise AdapterError(f"dims {h}x{w} not divisible by pool factor {pf}")
        return frame.reshape(h // pf, pf, w // pf, pf, 3).mean(axis=(1, 3)).ravel()

    def _projection(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        if k not in self._cache:
            if self.dim > k:
                raise AdapterError(f"dim {self.dim} exceeds pooled value count {k}")
            rng = np.random.default_rng([self.seed, k])
            weight = rng.standard_normal((self.dim, k)) / np.sqrt(k)
            bias = 0.1 * rng.standard_normal(self.dim)
            self._cache[k] = (weight, bias)
        return self._cache[k]

    def encode(self, frame: np.ndarray) -> np.ndarray:
        x = self._pooled(np.asarray(frame, dtype=np.float64))
        weight, bias = self._projection(x.size)
        return np.tanh(weight @ x + bias)

    def grad_distance(self, frame: np.ndarray, target: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        x = self._pooled(frame)
        weight, bias = self._projection(x.size)
        z = np.tanh(weight @ x + bias)
        diff = z - target
        d = np.linalg.norm(diff)
        if d == 0.0:
            return np.zeros_like(frame)
        pf = self.pool_factor
        h, w = frame.shape[:2]
        g_pool = (weight.T @ (diff / d * (1.0 - z * z))).reshape(h // pf, w // pf, 3)
        return np.repeat(np.repeat(g_pool, pf, axis=0), pf, axis=1) / (pf * pf)


class NumericalGradient:
    """Central-difference gradient wrapper for black-box encoders.

    Cost: two encode calls per pixel channel, so H * W * 6 encodes per
    GRAD request. Fine for a reference implementation, prohibitive for
    production use; mount an analytic encoder there instead.
    """

    def __init__(self, encoder, h: float = 1e-3):
        self.encoder = encoder
        self.id = encoder.id
        self.dim = encoder.dim
        self.h = h

    def encode(self, frame: np.ndarray) -> np.ndarray:
        return self.encoder.encode(frame)

    def grad_distance(self, frame: np.ndarray, target: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64).copy()
        grad = np.empty_like(frame)
        flat = frame.ravel()
        gflat = grad.ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + self.h
            dp = np.linalg.norm(self.encoder.encode(frame) - target)
            flat[j] = orig - self.h
            dm = np.linalg.norm(self.encoder.encode(frame) - target)
            flat[j] = orig
            gflat[j] = (dp - dm) / (2.0 * self.h)
        return grad
