"""Small dense networks with explicit forward/backward passes.

Everything is plain numpy: a multi-layer perceptron whose backward pass
returns parameter gradients for a scalar loss, plus an Adam optimizer.
Keeping the chain rule in the open makes the training loop, its tests, and
the finite-difference gradient check entirely self-contained.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

Params = List[np.ndarray]        # [W0, b0, W1, b1, ...]


def init_mlp(sizes: Sequence[int], rng: np.random.Generator,
             final_scale: float = 1.0) -> Params:
    """Xavier-uniform weights, zero biases; the last layer optionally scaled
    down so initial outputs start near zero."""
    params: Params = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, (n_in, n_out))
        if i == len(sizes) - 2:
            w *= final_scale
        params.append(w)
        params.append(np.zeros(n_out))
    return params


def mlp_forward(params: Params, x: np.ndarray
                ) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Forward pass with tanh hidden layers and a linear head.

    Returns (output, cache); ``cache`` holds the layer inputs needed by
    :func:`mlp_backward`.
    """
    cache = [x]
    h = x
    layers = len(params) // 2
    for i in range(layers):
        z = h @ params[2 * i] + params[2 * i + 1]
        if i < layers - 1:
            h = np.tanh(z)
        else:
            h = z
        cache.append(h)
    return h, cache


def mlp_backward(params: Params, cache: List[np.ndarray],
                 grad_out: np.ndarray) -> Tuple[Params, np.ndarray]:
    """Backpropagate ``grad_out`` (dLoss/dOutput) through the cached pass.

    Returns (parameter gradients matching ``params``, dLoss/dInput).
    """
    layers = len(params) // 2
    grads: Params = [np.zeros_like(p) for p in params]
    delta = grad_out
    for i in reversed(range(layers)):
        h_in = cache[i]
        if i < layers - 1:
            # cache[i + 1] is tanh(z); d tanh = 1 - tanh^2
            delta = delta * (1.0 - cache[i + 1] ** 2)
        grads[2 * i] = h_in.T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        delta = delta @ params[2 * i].T
    return grads, delta


def flatten(params: Params) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params])


def unflatten_like(vec: np.ndarray, params: Params) -> Params:
    out, at = [], 0
    for p in params:
        out.append(vec[at:at + p.size].reshape(p.shape).copy())
        at += p.size
    return out


def numeric_gradient(loss_fn, params: Params, eps: float = 1e-6) -> Params:
    """Central finite differences of a scalar loss over every parameter."""
    grads = [np.zeros_like(p) for p in params]
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        gflat = grads[pi].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            hi = loss_fn(params)
            flat[j] = orig - eps
            lo = loss_fn(params)
            flat[j] = orig
            gflat[j] = (hi - lo) / (2.0 * eps)
    return grads


class Adam:
    """Adam over a parameter list, with optional global-norm clipping."""

    def __init__(self, params: Params, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 max_grad_norm: float = 0.5):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.max_grad_norm = max_grad_norm
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Params, grads: Params) -> float:
        """Update ``params`` in place; returns the pre-clip gradient norm."""
        norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
        scale = 1.0
        if self.max_grad_norm and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-12)
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g = g * scale
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
        return norm

    def state_dict(self) -> Dict[str, np.ndarray]:
        out = {"t": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m{i}"] = m
            out[f"v{i}"] = v
        return out

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self.t = int(state["t"])
        self.m = [state[f"m{i}"].copy() for i in range(len(self.m))]
        self.v = [state[f"v{i}"].copy() for i in range(len(self.v))]
