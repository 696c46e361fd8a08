"""Minimal numpy layers with explicit backward passes.

Everything here is sized for desk-scale probes (batch of one utterance per
call, sequence-major arrays), with float32 training and float64 gradient
checking selected by the probe's dtype. Each layer accumulates parameter
gradients in place and returns the gradient w.r.t. its input.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def size(self) -> int:
        return self.value.size


def _uniform(rng: np.random.Generator, shape, scale: float, dtype) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax(x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def log_softmax_backward(y, grad_y, axis=-1):
    """Gradient through y = log_softmax(x): dx = dy - softmax * sum(dy)."""
    return grad_y - np.exp(y) * np.sum(grad_y, axis=axis, keepdims=True)


def cross_entropy(logits, label: int) -> tuple[float, np.ndarray]:
    """Softmax cross entropy of a single logit vector; returns loss, dlogits."""
    ls = log_softmax(np.asarray(logits, dtype=np.float64))
    loss = -float(ls[label])
    grad = np.exp(ls)
    grad[label] -= 1.0
    return loss, grad


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "linear"):
        k = 1.0 / np.sqrt(in_dim)
        self.weight = Parameter(f"{name}.weight", _uniform(rng, (out_dim, in_dim), k, dtype))
        self.bias = Parameter(f"{name}.bias", _uniform(rng, (out_dim,), k, dtype))
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.weight.grad += grad_out.T @ self._x
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class LSTMCell:
    """One direction over a full sequence; gate order i, f, g, o."""

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "lstm"):
        k = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.w_in = Parameter(f"{name}.w_in", _uniform(rng, (4 * hidden, input_dim), k, dtype))
        self.w_rec = Parameter(f"{name}.w_rec", _uniform(rng, (4 * hidden, hidden), k, dtype))
        self.bias = Parameter(f"{name}.bias", _uniform(rng, (4 * hidden,), k, dtype))
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        T = x.shape[0]
        H = self.hidden
        dtype = self.w_in.value.dtype
        h = np.zeros((T, H), dtype=dtype)
        c = np.zeros((T, H), dtype=dtype)
        gates = np.zeros((T, 4 * H), dtype=dtype)
        pre = x @ self.w_in.value.T + self.bias.value
        h_prev = np.zeros(H, dtype=dtype)
        c_prev = np.zeros(H, dtype=dtype)
        for t in range(T):
            z = pre[t] + h_prev @ self.w_rec.value.T
            i = sigmoid(z[:H])
            f = sigmoid(z[H:2 * H])
            g = np.tanh(z[2 * H:3 * H])
            o = sigmoid(z[3 * H:])
            c[t] = f * c_prev + i * g
            h[t] = o * np.tanh(c[t])
            gates[t, :H] = i
            gates[t, H:2 * H] = f
            gates[t, 2 * H:3 * H] = g
            gates[t, 3 * H:] = o
            h_prev, c_prev = h[t], c[t]
        self._cache = (x, h, c, gates)
        return h

    def backward(self, grad_h: np.ndarray) -> np.ndarray:
        x, h, c, gates = self._cache
        T = x.shape[0]
        H = self.hidden
        dtype = self.w_in.value.dtype
        grad_x = np.zeros_like(x)
        dh_next = np.zeros(H, dtype=dtype)
        dc_next = np.zeros(H, dtype=dtype)
        for t in range(T - 1, -1, -1):
            i = gates[t, :H]
            f = gates[t, H:2 * H]
            g = gates[t, 2 * H:3 * H]
            o = gates[t, 3 * H:]
            c_prev = c[t - 1] if t > 0 else np.zeros(H, dtype=dtype)
            h_prev = h[t - 1] if t > 0 else np.zeros(H, dtype=dtype)
            tanh_c = np.tanh(c[t])
            dh = grad_h[t] + dh_next
            dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            do = dh * tanh_c
            dz = np.concatenate([di * i * (1.0 - i),
                                 df * f * (1.0 - f),
                                 dg * (1.0 - g * g),
                                 do * o * (1.0 - o)])
            self.w_in.grad += np.outer(dz, x[t])
            self.w_rec.grad += np.outer(dz, h_prev)
            self.bias.grad += dz
            grad_x[t] = dz @ self.w_in.value
            dh_next = dz @ self.w_rec.value
            dc_next = dc * f
        return grad_x

    def parameters(self) -> list[Parameter]:
        return [self.w_in, self.w_rec, self.bias]


class BiLSTM:
    """Bidirectional layer; output concatenates both directions (width 2H)."""

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "blstm"):
        self.fw = LSTMCell(input_dim, hidden, rng, dtype, f"{name}.fw")
        self.bw = LSTMCell(input_dim, hidden, rng, dtype, f"{name}.bw")
        self.hidden = hidden

    def forward(self, x: np.ndarray) -> np.ndarray:
        h_fw = self.fw.forward(x)
        h_bw = self.bw.forward(x[::-1])[::-1]
        return np.concatenate([h_fw, h_bw], axis=1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        H = self.hidden
        grad_fw = self.fw.backward(np.ascontiguousarray(grad_out[:, :H]))
        grad_bw = self.bw.backward(np.ascontiguousarray(grad_out[::-1, H:]))
        return grad_fw + grad_bw[::-1]

    def parameters(self) -> list[Parameter]:
        return self.fw.parameters() + self.bw.parameters()

    def tie_directions(self) -> None:
        """Share forward-direction weights with the backward direction."""
        self.bw.w_in.value[...] = self.fw.w_in.value
        self.bw.w_rec.value[...] = self.fw.w_rec.value
        self.bw.bias.value[...] = self.fw.bias.value


class BLSTMStack:
    def __init__(self, input_dim: int, hidden: int, depth: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.layers = []
        d = input_dim
        for i in range(depth):
            self.layers.append(BiLSTM(d, hidden, rng, dtype, name=f"blstm{i}"))
            d = 2 * hidden
        self.out_dim = d

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]
