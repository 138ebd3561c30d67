"""Minimal dense + LSTM neural stack with manual backprop, in float64.

Networks are an optional LSTM encoder over a state sequence followed by two
rectifier hidden layers and a squashed output head. The critic variant
concatenates an auxiliary (action) vector after the encoder. Every gradient
here is validated against central finite differences in the test suite.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ParamSet = dict  # name -> np.ndarray


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden1: int = 128
    hidden2: int = 64
    lstm_hidden: int | None = 64   # None: feed the last sequence frame directly
    output_dim: int = 1
    head: str = "identity"         # "sigmoid" or "identity"
    aux_dim: int = 0               # extra vector concatenated after the encoder
    skip: bool = False             # also concatenate the raw last frame

    def enc_dim(self) -> int:
        if not self.lstm_hidden:
            return self.input_dim
        return self.lstm_hidden + (self.input_dim if self.skip else 0)


def _uniform(rng, fan_in, shape):
    lim = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-lim, lim, shape)


def init_params(spec: NetSpec, rng: np.random.Generator) -> ParamSet:
    p: ParamSet = {}
    if spec.lstm_hidden:
        H, D = spec.lstm_hidden, spec.input_dim
        p["lstm_Wx"] = _uniform(rng, D, (D, 4 * H))
        p["lstm_Wh"] = _uniform(rng, H, (H, 4 * H))
        b = np.zeros(4 * H)
        b[H: 2 * H] = 1.0  # forget-gate bias stabilization
        p["lstm_b"] = b
    d0 = spec.enc_dim() + spec.aux_dim
    p["W1"] = _uniform(rng, d0, (d0, spec.hidden1))
    p["b1"] = np.zeros(spec.hidden1)
    p["W2"] = _uniform(rng, spec.hidden1, (spec.hidden1, spec.hidden2))
    p["b2"] = np.zeros(spec.hidden2)
    p["W3"] = _uniform(rng, spec.hidden2, (spec.hidden2, spec.output_dim))
    p["b3"] = np.zeros(spec.output_dim)
    return p


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(params: ParamSet, seq: np.ndarray):
    """seq (B, K, D) -> final hidden state (B, H) plus a BPTT cache."""
    if seq.ndim != 3 or seq.shape[1] == 0:
        raise ValueError("sequence must be (B, K, D) with K >= 1")
    Wx, Wh, b = params["lstm_Wx"], params["lstm_Wh"], params["lstm_b"]
    B, K, _ = seq.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    for k in range(K):
        x = seq[:, k, :]
        z = x @ Wx + h @ Wh + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H: 2 * H])
        g = np.tanh(z[:, 2 * H: 3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        steps.append((x, h, c, i, f, g, o, tc))
        h = o * tc
        c = c_new
    return h, (steps, seq.shape)


def lstm_backward(params: ParamSet, cache, dh_last: np.ndarray):
    """Backprop-through-time; returns (grads, dseq)."""
    Wx, Wh = params["lstm_Wx"], params["lstm_Wh"]
    steps, seq_shape = cache
    H = Wh.shape[0]
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dseq = np.zeros(seq_shape)
    dh = dh_last
    dc = np.zeros_like(dh_last)
    for k in range(len(steps) - 1, -1, -1):
        x, h_prev, c_prev, i, f, g, o, tc = steps[k]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        dWx += x.T @ dz
        dWh += h_prev.T @ dz
        db += dz.sum(axis=0)
        dseq[:, k, :] = dz @ Wx.T
        dh = dz @ Wh.T
        dc = dc * f
    return {"lstm_Wx": dWx, "lstm_Wh": dWh, "lstm_b": db}, dseq


def lstm_encode(params: ParamSet, seq: np.ndarray) -> np.ndarray:
    """Encode a state sequence into its final LSTM hidden vector."""
    h, _ = lstm_forward(params, seq)
    return h


def forward(spec: NetSpec, params: ParamSet, seq: np.ndarray,
            aux: np.ndarray | None = None):
    """seq (B, K, D) [+ aux (B, A)] -> output (B, output_dim) and a cache."""
    if seq.ndim != 3 or seq.shape[2] != spec.input_dim:
        raise ValueError(f"expected input (B, K, {spec.input_dim})")
    if spec.lstm_hidden:
        enc, lcache = lstm_forward(params, seq)
        if spec.skip:
            enc = np.concatenate([enc, seq[:, -1, :]], axis=1)
    else:
        enc, lcache = seq[:, -1, :], None
    z0 = enc if aux is None else np.concatenate([enc, aux], axis=1)
    a1 = z0 @ params["W1"] + params["b1"]
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ params["W2"] + params["b2"]
    h2 = np.maximum(a2, 0.0)
    pre = h2 @ params["W3"] + params["b3"]
    out = _sigmoid(pre) if spec.head == "sigmoid" else pre
    return out, (lcache, z0, a1, h1, a2, h2, out)


def backward(spec: NetSpec, params: ParamSet, cache, dout: np.ndarray):
    """Returns (grads, dseq, daux)."""
    lcache, z0, a1, h1, a2, h2, out = cache
    dpre = dout * out * (1.0 - out) if spec.head == "sigmoid" else dout
    grads = {
        "W3": h2.T @ dpre, "b3": dpre.sum(axis=0),
    }
    dh2 = dpre @ params["W3"].T
    da2 = dh2 * (a2 > 0)
    grads["W2"] = h1.T @ da2
    grads["b2"] = da2.sum(axis=0)
    dh1 = da2 @ params["W2"].T
    da1 = dh1 * (a1 > 0)
    grads["W1"] = z0.T @ da1
    grads["b1"] = da1.sum(axis=0)
    dz0 = da1 @ params["W1"].T
    enc_dim = spec.enc_dim()
    denc = dz0[:, :enc_dim]
    daux = dz0[:, enc_dim:] if spec.aux_dim else None
    if spec.lstm_hidden:
        H = spec.lstm_hidden
        lgrads, dseq = lstm_backward(params, lcache, denc[:, :H])
        if spec.skip:
            dseq[:, -1, :] += denc[:, H:]
        grads.update(lgrads)
    else:
        dseq = None  # gradients never flow into raw observations
    return grads, dseq, daux


class Adam:
    """Standard Adam; refuses non-finite gradients (training-divergence signal)."""

    def __init__(self, params: ParamSet, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: ParamSet, grads: ParamSet) -> None:
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for {k}")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + self.eps)

    def state(self) -> dict:
        out = {"t": np.array([self.t])}
        for k in self.m:
            out[f"m/{k}"] = self.m[k]
            out[f"v/{k}"] = self.v[k]
        return out

    def load_state(self, state: dict) -> None:
        self.t = int(state["t"][0])
        for k in self.m:
            self.m[k] = state[f"m/{k}"]
            self.v[k] = state[f"v/{k}"]


def soft_update(target: ParamSet, source: ParamSet, zeta: float) -> None:
    """theta' <- zeta * theta + (1 - zeta) * theta', element-wise in place."""
    for k in target:
        target[k] = zeta * source[k] + (1.0 - zeta) * target[k]


CHECKPOINT_VERSION = "mecsim-ckpt-1"


def save_checkpoint(path: str, groups: dict[str, ParamSet], meta: dict | None = None) -> None:
    flat = {"__version__": np.array([CHECKPOINT_VERSION]),
            "__meta__": np.array([json.dumps(meta or {}, sort_keys=True)])}
    for gname, params in groups.items():
        for k, v in params.items():
            flat[f"{gname}::{k}"] = v
    np.savez(path, **flat)


def load_checkpoint(path: str) -> tuple[dict[str, ParamSet], dict]:
    with np.load(path, allow_pickle=False) as z:
        if str(z["__version__"][0]) != CHECKPOINT_VERSION:
            raise ValueError("unsupported checkpoint version")
        meta = json.loads(str(z["__meta__"][0]))
        groups: dict[str, ParamSet] = {}
        for key in z.files:
            if key.startswith("__"):
                continue
            gname, pname = key.split("::", 1)
            groups.setdefault(gname, {})[pname] = z[key]
    return groups, meta
