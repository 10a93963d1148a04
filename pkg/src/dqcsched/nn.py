"""Minimal fully connected network with hand-written reverse-mode gradients.

Only the operations the RL scheduler needs are implemented: affine layers
with tanh hidden activations, a masked softmax with log-probabilities and
entropy, and an Adam optimizer. Everything is float64 numpy, so analytic
gradients can be checked against central finite differences.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """Feed-forward net: affine layers, tanh on hidden layers, linear output."""

    def __init__(self, layer_sizes: list[int], rng: np.random.Generator):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = list(layer_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(layer_sizes, layer_sizes[1:])):
            scale = 1.0 / np.sqrt(fan_in)
            w = rng.normal(0.0, scale, size=(fan_in, fan_out))
            if i == len(layer_sizes) - 2:
                w = w * 0.01  # near-uniform initial outputs
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, cache of per-layer activations) for a batch."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        activations = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == last else np.tanh(z)
            activations.append(h)
        return h, activations

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, activations: list[np.ndarray], grad_out: np.ndarray
                 ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of a scalar loss wrt all parameters, given dL/d(output).

        ``activations`` is the cache from :meth:`forward`; returns one
        (dW, db) pair per layer, first layer first.
        """
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)
        delta = np.atleast_2d(grad_out)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = activations[i]
            grads[i] = (h_in.T @ delta, delta.sum(axis=0))
            if i > 0:
                # tanh'(z) expressed through the cached activation value
                delta = (delta @ self.weights[i].T) * (1.0 - activations[i] ** 2)
        return grads

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset: offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError("flat parameter vector has wrong length")


class Adam:
    """Adaptive-moment gradient descent over a list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the entries where ``mask`` is True; zeros elsewhere."""
    logits = np.asarray(logits, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("masked_softmax needs at least one selectable entry")
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted[mask].max()
    exp = np.where(mask, np.exp(shifted), 0.0)
    return exp / exp.sum()


def masked_entropy(probs: np.ndarray, mask: np.ndarray) -> float:
    """Shannon entropy of a masked distribution."""
    p = probs[mask]
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())
