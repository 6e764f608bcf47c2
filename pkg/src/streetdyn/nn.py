"""Small numpy MLPs with exact reverse-mode gradients and an Adam optimiser."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class Mlp:
    """Affine layers with tanh between them and a linear output."""

    widths: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, widths, rng: np.random.Generator, scale: float = 1.0, out_scale: float | None = None) -> "Mlp":
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2 or min(widths) < 1:
            raise DimensionError(f"bad layer widths {widths}")
        ws, bs = [], []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            s = scale / np.sqrt(a)
            if out_scale is not None and i == len(widths) - 2:
                s = out_scale
            ws.append(rng.uniform(-s, s, size=(a, b)))
            bs.append(np.zeros(b))
        return cls(widths, ws, bs)

    @classmethod
    def zeros(cls, widths) -> "Mlp":
        widths = tuple(int(w) for w in widths)
        return cls(widths, [np.zeros((a, b)) for a, b in zip(widths[:-1], widths[1:])],
                   [np.zeros(b) for b in widths[1:]])

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got {vec.shape}")
        i = 0
        for p in self.params():
            p[...] = vec[i:i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> "Mlp":
        return Mlp(self.widths, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def check_finite(self) -> None:
        for p in self.params():
            if not np.all(np.isfinite(p)):
                raise NonFiniteError("non-finite network parameter")

    def forward(self, x: np.ndarray, cache: bool = False):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.widths[0]:
            raise DimensionError(f"input width {x.shape[-1]} != {self.widths[0]}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return (h, acts) if cache else h

    def backward(self, acts: list[np.ndarray], upstream: np.ndarray):
        """Parameter gradients (same order as ``params()``) and the input gradient.

        ``acts`` comes from ``forward(x, cache=True)``; a batch dimension, if
        present, is summed over.
        """
        g = np.asarray(upstream, dtype=np.float64)
        if g.shape != acts[-1].shape:
            raise DimensionError(f"upstream shape {g.shape} != output shape {acts[-1].shape}")
        grads: list[np.ndarray] = []
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            if i < last:
                g = g * (1.0 - acts[i + 1] ** 2)
            a = acts[i]
            if a.ndim == 1:
                gw = np.outer(a, g)
                gb = g.copy()
            else:
                gw = a.T @ g
                gb = g.sum(axis=0)
            grads = [gw, gb] + grads
            g = g @ self.weights[i].T
        return grads, g

    def __call__(self, x):
        return self.forward(x)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Update ``params`` in place with bias-corrected Adam."""
        if len(params) != len(grads):
            raise DimensionError("parameter and gradient lists differ in length")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("non-finite gradient")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(target: Mlp, source: Mlp, rate: float) -> None:
    for t, s in zip(target.params(), source.params()):
        t *= 1.0 - rate
        t += rate * s
