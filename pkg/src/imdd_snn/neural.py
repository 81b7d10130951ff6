"""Small neural kernel written directly on numpy.

Spiking path: leaky-integrate-and-fire (LIF) hidden layer, non-spiking leaky
integrator (LI) readout, backpropagation through time with a fast-sigmoid
surrogate for the spike nonlinearity. Non-spiking path: one ReLU hidden
layer. Both are trained with Adam on a softmax cross-entropy.

Spike tensors are arrays of 0/1 shaped ``(neurons, T)`` or, batched,
``(batch, neurons, T)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_CLASSES = 4


@dataclass(frozen=True)
class LifParams:
    tau_m: float = 10.0
    tau_s: float = 5.0
    v_th: float = 1.0
    v_r: float = 0.0
    surrogate_gamma: float = 10.0

    def __post_init__(self):
        if self.tau_m <= 0 or self.tau_s <= 0:
            raise ValueError("time constants must be positive")
        if self.v_th <= self.v_r:
            raise ValueError("threshold must exceed the reset potential")

    @property
    def mem_decay(self):
        return np.exp(-1.0 / self.tau_m)

    @property
    def syn_decay(self):
        return np.exp(-1.0 / self.tau_s)


@dataclass
class LifState:
    v: np.ndarray
    i: np.ndarray

    @classmethod
    def rest(cls, shape, p):
        return cls(v=np.full(shape, p.v_r, dtype=float), i=np.zeros(shape))


def lif_step(state, weighted_input, p):
    """Advance LIF neurons by one step; returns ``(new_state, spikes)``.

    The synaptic current decays with ``exp(-1/tau_s)`` and integrates the
    weighted input; the membrane relaxes towards ``v_r + i`` with
    ``exp(-1/tau_m)``. Neurons crossing ``v_th`` emit a spike and are set
    back to ``v_r``.
    """
    beta = p.mem_decay
    i = p.syn_decay * state.i + weighted_input
    v = beta * state.v + (1 - beta) * (p.v_r + i)
    spikes = (v > p.v_th).astype(float)
    v = np.where(spikes > 0, p.v_r, v)
    return LifState(v=v, i=i), spikes


def surrogate_derivative(v_minus_th, gamma):
    """Fast-sigmoid stand-in for the derivative of the Heaviside step."""
    return 1.0 / (gamma * np.abs(v_minus_th) + 1.0) ** 2


def _as_batch(spikes):
    spikes = np.asarray(spikes)
    if spikes.ndim == 2:
        return spikes[None], True
    if spikes.ndim != 3:
        raise ValueError(f"spike tensor must be 2-D or 3-D, got shape {spikes.shape}")
    return spikes, False


def _time_groups(spikes):
    """Collapse time steps that carry identical input columns.

    Returns ``(columns, index)`` with ``spikes[..., t] == columns[..., index[t]]``.
    The encoders used here repeat with period 1 or 2, which turns T matrix
    products into at most two.
    """
    T = spikes.shape[-1]
    for period in (1, 2):
        if T > period and np.array_equal(spikes[..., period:], spikes[..., :-period]):
            return spikes[..., :period], np.arange(T) % period
    return spikes, np.arange(T)


def _project(W, spikes):
    """Weighted input ``W @ s[t]`` for every step: ``(B, n_out, T)``."""
    cols, index = _time_groups(spikes)
    cur = np.einsum("oi,bip->bop", W, cols.astype(W.dtype), optimize=True)
    return cur[..., index]


def _check_inputs(spikes, W, T):
    if spikes.shape[1] != W.shape[1]:
        raise ValueError(f"weights expect {W.shape[1]} inputs, spikes carry {spikes.shape[1]}")
    if spikes.shape[2] != T:
        raise ValueError(f"expected {T} time steps, got {spikes.shape[2]}")


def lif_layer_forward(inputs, W, p, T):
    """Run a dense LIF layer over ``T`` steps starting from rest.

    Returns the output spikes and a cache holding the pre-reset membrane
    potentials and the inputs for :func:`snn_backward`.
    """
    s, squeeze = _as_batch(inputs)
    _check_inputs(s, W, T)
    cur = _project(W, s)
    return _lif_from_currents(cur, p, s, squeeze)


def _lif_from_currents(cur, p, s, squeeze=False):
    B, N, T = cur.shape
    alpha, beta = p.syn_decay, p.mem_decay
    v = np.full((B, N), p.v_r)
    i = np.zeros((B, N))
    v_pre = np.empty((B, N, T))
    z = np.empty((B, N, T))
    for t in range(T):
        i = alpha * i + cur[:, :, t]
        v = beta * v + (1 - beta) * (p.v_r + i)
        v_pre[:, :, t] = v
        spk = v > p.v_th
        z[:, :, t] = spk
        v = np.where(spk, p.v_r, v)
    if not np.all(np.isfinite(v_pre)):
        raise FloatingPointError("non-finite membrane potential in LIF layer")
    cache = {"inputs": s, "v_pre": v_pre, "spikes": z}
    return (z[0] if squeeze else z), cache


def li_readout_forward(inputs, W, p, T):
    """Leaky-integrator readout; returns membrane traces ``(N_o, T)`` and a cache.

    The decision logits are the maximum of each trace over time, see
    :func:`readout_logits`.
    """
    s, squeeze = _as_batch(inputs)
    _check_inputs(s, W, T)
    cur = np.einsum("oh,bht->bot", W, s, optimize=True)
    B, O, _ = cur.shape
    alpha, beta = p.syn_decay, p.mem_decay
    v = np.full((B, O), p.v_r)
    i = np.zeros((B, O))
    trace = np.empty((B, O, T))
    for t in range(T):
        i = alpha * i + cur[:, :, t]
        v = beta * v + (1 - beta) * (p.v_r + i)
        trace[:, :, t] = v
    cache = {"inputs": s, "trace": trace}
    return (trace[0] if squeeze else trace), cache


def readout_logits(trace):
    return trace.max(axis=-1)


def dense_forward(x, W, b, activation=None):
    """Affine layer ``y = x @ W.T + b`` with optional ReLU."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != W.shape[1]:
        raise ValueError(f"layer expects {W.shape[1]} features, got {x.shape[-1]}")
    pre = x @ W.T + b
    out = np.maximum(pre, 0.0) if activation == "relu" else pre
    return out, {"x": x, "pre": pre, "activation": activation}


def dense_backward(grad_out, W, cache):
    """Gradients ``(dx, dW, db)`` of a :func:`dense_forward` call."""
    g = np.asarray(grad_out, dtype=float)
    if cache["activation"] == "relu":
        g = g * (cache["pre"] > 0)
    x = cache["x"]
    x2 = x.reshape(-1, x.shape[-1])
    g2 = g.reshape(-1, g.shape[-1])
    return g @ W, g2.T @ x2, g2.sum(axis=0)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to the logits.

    Accepts one sample (``logits`` of shape ``(4,)``) or a batch ``(B, 4)``;
    for a batch the gradient is that of the mean loss.
    """
    z = np.asarray(logits, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    labels = np.atleast_1d(np.asarray(labels))
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_norm
    n = z.shape[0]
    loss = -log_p[np.arange(n), labels].mean()
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return float(loss), (grad[0] if single else grad)


def argmax_decision(logits):
    """Class with the largest logit; ties go to the lowest index."""
    return np.argmax(logits, axis=-1)


# ---------------------------------------------------------------------------
# encoders


def ternary_levels(M_t):
    """Largest representable magnitude ``(3**M_t - 1) / 2``."""
    return (3**M_t - 1) // 2


def quantize_ternary(x, scale, M_t):
    x = np.clip(np.asarray(x, dtype=float), -scale, scale)
    return np.rint(x / scale * ternary_levels(M_t)).astype(np.int64)


def balanced_ternary_digits(q, M_t):
    """Digits in {-1, 0, 1}, least significant first, along a new last axis."""
    r = np.asarray(q, dtype=np.int64)
    digits = np.empty(r.shape + (M_t,), dtype=np.int8)
    for k in range(M_t):
        d = (r + 1) % 3 - 1
        digits[..., k] = d
        r = (r - d) // 3
    return digits


def encode_ternary(x, scale, M_t=8, T=20):
    """Encode real samples as balanced-ternary spike trains.

    Each sample is clamped to ``[-scale, scale]``, quantized to an integer in
    ``[-(3**M_t - 1)/2, (3**M_t - 1)/2]`` and written with ``M_t`` balanced
    ternary digits (row ``i`` carries the digit of weight ``3**i``). A ``+1``
    digit fires on every step, ``-1`` on odd steps only, ``0`` stays silent.

    Returns a ``uint8`` array of shape ``x.shape + (M_t, T)``.
    """
    if M_t < 1 or T < 2 or scale <= 0:
        raise ValueError("need M_t >= 1, T >= 2 and scale > 0")
    digits = balanced_ternary_digits(quantize_ternary(x, scale, M_t), M_t)
    odd = (np.arange(T) % 2).astype(np.uint8)
    return ((digits[..., None] == 1) | ((digits[..., None] == -1) & (odd == 1))).astype(np.uint8)


def decode_ternary(spikes):
    """Recover the quantized integer from :func:`encode_ternary` spike trains."""
    s = np.asarray(spikes)
    digits = np.where(s[..., 0] == 1, 1, np.where(s[..., 1] == 1, -1, 0))
    weights = 3 ** np.arange(s.shape[-2], dtype=np.int64)
    return (digits * weights).sum(axis=-1)


def encode_feedback_onehot(cls, T=20):
    """One neuron per class, firing on every step for the given class.

    Returns ``uint8`` of shape ``cls.shape + (4, T)``.
    """
    cls = np.asarray(cls)
    if np.any((cls < 0) | (cls >= N_CLASSES)):
        raise ValueError("class indices must lie in 0..3")
    onehot = (cls[..., None] == np.arange(N_CLASSES)).astype(np.uint8)
    return np.repeat(onehot[..., None], T, axis=-1)


def onehot(cls):
    cls = np.asarray(cls)
    return (cls[..., None] == np.arange(N_CLASSES)).astype(float)


# ---------------------------------------------------------------------------
# models


def init_uniform(rng, n_out, n_in):
    bound = 1.0 / np.sqrt(n_in)
    return rng.uniform(-bound, bound, size=(n_out, n_in))


@dataclass
class SnnModel:
    """LIF hidden layer followed by a leaky-integrator readout.

    ``layout = (n, m, M_t)``: ``n`` ternary-encoded received samples followed
    by ``m`` one-hot encoded past decisions.
    """

    W_in: np.ndarray
    W_out: np.ndarray
    lif: LifParams = field(default_factory=LifParams)
    T: int = 20
    layout: tuple = (1, 0, 8)
    scale: float = 1.0

    kind = "snn"

    def __post_init__(self):
        n, m, M_t = self.layout
        if self.W_in.shape[1] != n * M_t + N_CLASSES * m:
            raise ValueError(
                f"W_in has {self.W_in.shape[1]} inputs, layout {self.layout} needs "
                f"{n * M_t + N_CLASSES * m}"
            )
        if self.W_out.shape != (N_CLASSES, self.W_in.shape[0]):
            raise ValueError(f"W_out must be ({N_CLASSES}, {self.W_in.shape[0]})")
        self.layout = tuple(int(v) for v in self.layout)

    @classmethod
    def initialize(cls, layout, n_hidden, rng, lif=None, T=20, scale=1.0):
        n, m, M_t = layout
        n_in = n * M_t + N_CLASSES * m
        return cls(
            W_in=init_uniform(rng, n_hidden, n_in),
            W_out=init_uniform(rng, N_CLASSES, n_hidden),
            lif=lif or LifParams(),
            T=T,
            layout=tuple(layout),
            scale=scale,
        )

    @property
    def n_hidden(self):
        return self.W_in.shape[0]

    def params(self):
        return {"W_in": self.W_in, "W_out": self.W_out}

    def encode(self, feedforward, feedback):
        """Spike tensor ``(B, n*M_t + 4*m, T)`` for a batch of windows."""
        n, m, M_t = self.layout
        ff = np.asarray(feedforward, dtype=float).reshape(-1, n)
        parts = [encode_ternary(ff, self.scale, M_t, self.T).reshape(ff.shape[0], n * M_t, self.T)]
        if m:
            fb = np.asarray(feedback).reshape(-1, m)
            parts.append(encode_feedback_onehot(fb, self.T).reshape(fb.shape[0], 4 * m, self.T))
        return np.concatenate(parts, axis=1)

    def forward(self, spikes):
        """Logits ``(B, 4)`` and the caches needed by :func:`snn_backward`."""
        hidden, hcache = lif_layer_forward(spikes, self.W_in, self.lif, self.T)
        trace, rcache = li_readout_forward(hidden, self.W_out, self.lif, self.T)
        return readout_logits(trace), (hcache, rcache)

    def forward_currents(self, currents):
        """Logits from precomputed hidden input currents ``(B, N_h, T)``."""
        hidden, _ = _lif_from_currents(currents, self.lif, None)
        trace, _ = li_readout_forward(hidden, self.W_out, self.lif, self.T)
        return readout_logits(trace)

    def logits(self, feedforward, feedback=None):
        return self.forward(self.encode(feedforward, feedback))[0]

    def decide(self, feedforward, feedback=None):
        return argmax_decision(self.logits(feedforward, feedback))


def snn_backward(model, caches, dlogits):
    """Surrogate-gradient BPTT through the LI readout and the LIF layer.

    The spike nonlinearity is differentiated with :func:`surrogate_derivative`;
    the reset is excluded from the gradient. Returns ``{"W_in", "W_out"}``.
    """
    if caches is None or len(caches) != 2:
        raise ValueError("snn_backward needs the caches of a forward pass")
    hcache, rcache = caches
    p = model.lif
    alpha, beta = p.syn_decay, p.mem_decay
    trace = rcache["trace"]
    z = hcache["spikes"]
    v_pre = hcache["v_pre"]
    s = hcache["inputs"]
    g = np.asarray(dlogits, dtype=float).reshape(trace.shape[0], -1)
    B, O, T = trace.shape

    # max over time routes the gradient to the first step holding the maximum
    t_star = trace.argmax(axis=-1)
    direct = np.zeros_like(trace)
    np.put_along_axis(direct, t_star[..., None], g[..., None], axis=-1)

    # readout: v_t = beta v_{t-1} + (1 - beta)(v_r + i_t), i_t = alpha i_{t-1} + W z_t
    grad_cur_out = np.empty_like(trace)
    gv = np.zeros((B, O))
    gi = np.zeros((B, O))
    for t in range(T - 1, -1, -1):
        gv = direct[:, :, t] + beta * gv
        gi = (1 - beta) * gv + alpha * gi
        grad_cur_out[:, :, t] = gi
    dW_out = np.einsum("bot,bht->oh", grad_cur_out, z, optimize=True)
    gz = np.einsum("oh,bot->bht", model.W_out, grad_cur_out, optimize=True)

    # hidden LIF with reset under stop-gradient
    sg = surrogate_derivative(v_pre - p.v_th, p.surrogate_gamma)
    grad_cur_in = np.empty_like(v_pre)
    gvt = np.zeros(v_pre.shape[:2])
    gi = np.zeros(v_pre.shape[:2])
    for t in range(T - 1, -1, -1):
        # gvt still holds dL/dv_pre[t + 1]; the reset gate (1 - z_t) is a constant
        gvt = gz[:, :, t] * sg[:, :, t] + beta * (1 - z[:, :, t]) * gvt
        gi = (1 - beta) * gvt + alpha * gi
        grad_cur_in[:, :, t] = gi
    cols, index = _time_groups(s)
    summed = np.stack([grad_cur_in[..., index == k].sum(axis=-1) for k in range(cols.shape[-1])], -1)
    dW_in = np.einsum("bhp,bip->hi", summed, cols.astype(float), optimize=True)
    return {"W_in": dW_in, "W_out": dW_out}


@dataclass
class AnnModel:
    """One ReLU hidden layer on raw samples and one-hot past decisions."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    layout: tuple = (1, 0)

    kind = "ann"

    def __post_init__(self):
        n, m = self.layout[:2]
        if self.W1.shape[1] != n + N_CLASSES * m:
            raise ValueError(
                f"W1 has {self.W1.shape[1]} inputs, layout {self.layout} needs {n + N_CLASSES * m}"
            )
        if self.W2.shape != (N_CLASSES, self.W1.shape[0]):
            raise ValueError(f"W2 must be ({N_CLASSES}, {self.W1.shape[0]})")
        self.layout = tuple(int(v) for v in self.layout[:2])

    @classmethod
    def initialize(cls, layout, n_hidden, rng):
        n, m = layout[:2]
        n_in = n + N_CLASSES * m
        bound_in, bound_h = 1 / np.sqrt(n_in), 1 / np.sqrt(n_hidden)
        return cls(
            W1=init_uniform(rng, n_hidden, n_in),
            b1=rng.uniform(-bound_in, bound_in, n_hidden),
            W2=init_uniform(rng, N_CLASSES, n_hidden),
            b2=rng.uniform(-bound_h, bound_h, N_CLASSES),
            layout=(n, m),
        )

    @property
    def n_hidden(self):
        return self.W1.shape[0]

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def features(self, feedforward, feedback=None):
        n, m = self.layout
        ff = np.asarray(feedforward, dtype=float).reshape(-1, n)
        if not m:
            return ff
        fb = onehot(np.asarray(feedback).reshape(-1, m)).reshape(ff.shape[0], N_CLASSES * m)
        return np.concatenate([ff, fb], axis=1)

    def forward(self, x):
        h, c1 = dense_forward(x, self.W1, self.b1, "relu")
        out, c2 = dense_forward(h, self.W2, self.b2)
        return out, (c1, c2)

    def backward(self, caches, dlogits):
        c1, c2 = caches
        dh, dW2, db2 = dense_backward(dlogits, self.W2, c2)
        _, dW1, db1 = dense_backward(dh, self.W1, c1)
        return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}

    def logits(self, feedforward, feedback=None):
        return self.forward(self.features(feedforward, feedback))[0]

    def decide(self, feedforward, feedback=None):
        return argmax_decision(self.logits(feedforward, feedback))


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params, grads, state):
    """One bias-corrected Adam step, updating ``params`` in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
