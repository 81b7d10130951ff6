"""Independent reference implementations used as test oracles.

Nothing here imports the package code paths it is compared against.
"""
import math


class Var:
    """Scalar node of a reverse-mode tape."""

    __slots__ = ("value", "parents", "grad")

    def __init__(self, value, parents=()):
        self.value = float(value)
        self.parents = parents
        self.grad = 0.0

    def __add__(self, other):
        other = other if isinstance(other, Var) else Var(other)
        return Var(self.value + other.value, ((self, 1.0), (other, 1.0)))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Var):
            return Var(self.value * other.value, ((self, other.value), (other, self.value)))
        return Var(self.value * other, ((self, float(other)),))

    __rmul__ = __mul__


def heaviside_surrogate(x, gamma):
    """Step forward, fast-sigmoid derivative backward."""
    return Var(1.0 if x.value > 0 else 0.0, ((x, 1.0 / (gamma * abs(x.value) + 1.0) ** 2),))


def constant(v):
    return Var(v)


def backprop(out_nodes_and_grads):
    order, seen = [], set()

    def visit(node):
        if id(node) in seen:
            return
        seen.add(id(node))
        for parent, _ in node.parents:
            visit(parent)
        order.append(node)

    for node, _ in out_nodes_and_grads:
        visit(node)
    for node, g in out_nodes_and_grads:
        node.grad += g
    for node in reversed(order):
        for parent, local in node.parents:
            parent.grad += local * node.grad


def snn_tape(spikes, W_in, W_out, tau_m, tau_s, v_th, v_r, gamma):
    """Unrolled LIF + LI network built element by element on the tape.

    ``spikes`` is a nested list [input][t]; weights are nested lists.
    Returns (logits, input-weight vars, output-weight vars).
    """
    n_in, T = len(spikes), len(spikes[0])
    n_h, n_o = len(W_in), len(W_out)
    a = math.exp(-1.0 / tau_s)
    b = math.exp(-1.0 / tau_m)
    w_in = [[Var(W_in[h][j]) for j in range(n_in)] for h in range(n_h)]
    w_out = [[Var(W_out[o][h]) for h in range(n_h)] for o in range(n_o)]

    v = [constant(v_r) for _ in range(n_h)]
    i = [constant(0.0) for _ in range(n_h)]
    hidden = [[None] * T for _ in range(n_h)]
    for t in range(T):
        for h in range(n_h):
            drive = constant(0.0)
            for j in range(n_in):
                if spikes[j][t]:
                    drive = drive + w_in[h][j] * float(spikes[j][t])
            i[h] = a * i[h] + drive
            vt = b * v[h] + (1 - b) * (i[h] + v_r)
            z = heaviside_surrogate(vt + (-v_th), gamma)
            hidden[h][t] = z
            # reset: v = vt * (1 - z) + v_r * z with z held constant
            keep = 0.0 if z.value else 1.0
            v[h] = vt * keep + v_r * (1 - keep)

    vo = [constant(v_r) for _ in range(n_o)]
    io = [constant(0.0) for _ in range(n_o)]
    traces = [[None] * T for _ in range(n_o)]
    for t in range(T):
        for o in range(n_o):
            drive = constant(0.0)
            for h in range(n_h):
                drive = drive + w_out[o][h] * hidden[h][t]
            io[o] = a * io[o] + drive
            vo[o] = b * vo[o] + (1 - b) * (io[o] + v_r)
            traces[o][t] = vo[o]
    logits = []
    for o in range(n_o):
        best = traces[o][0]
        for node in traces[o][1:]:
            if node.value > best.value:
                best = node
        logits.append(best)
    return logits, w_in, w_out


def lif_scalar(inputs, tau_m, tau_s, v_th, v_r):
    """Plain-float LIF recurrence for one neuron; returns (v_pre list, spikes list)."""
    a = math.exp(-1.0 / tau_s)
    b = math.exp(-1.0 / tau_m)
    v, i = v_r, 0.0
    vs, zs = [], []
    for x in inputs:
        i = a * i + x
        v = b * v + (1 - b) * (v_r + i)
        vs.append(v)
        if v > v_th:
            zs.append(1)
            v = v_r
        else:
            zs.append(0)
    return vs, zs


def li_scalar(inputs, tau_m, tau_s, v_r):
    a = math.exp(-1.0 / tau_s)
    b = math.exp(-1.0 / tau_m)
    v, i = v_r, 0.0
    out = []
    for x in inputs:
        i = a * i + x
        v = b * v + (1 - b) * (v_r + i)
        out.append(v)
    return out


def solve_dense(A, y):
    """Gaussian elimination with partial pivoting on nested lists."""
    n = len(A)
    M = [list(map(float, A[r])) + [float(y[r])] for r in range(n)]
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(M[r][c]))
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c:
                f = M[r][c] / M[c][c]
                for k in range(c, n + 1):
                    M[r][k] -= f * M[c][k]
    return [M[r][n] / M[r][r] for r in range(n)]


def convolve_direct(x, h):
    """O(N*M) full linear convolution."""
    out = [0.0] * (len(x) + len(h) - 1)
    for i, xv in enumerate(x):
        for j, hv in enumerate(h):
            out[i + j] += xv * hv
    return out


def rrc_closed_form(t, beta):
    """Root-raised-cosine value at t (symbol periods), including the limits."""
    if abs(t) < 1e-15:
        return 1 - beta + 4 * beta / math.pi
    if beta > 0 and abs(abs(t) - 1 / (4 * beta)) < 1e-15:
        return beta / math.sqrt(2) * (
            (1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
            + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta))
        )
    num = math.sin(math.pi * t * (1 - beta)) + 4 * beta * t * math.cos(math.pi * t * (1 + beta))
    return num / (math.pi * t * (1 - (4 * beta * t) ** 2))


def q_function(x):
    return 0.5 * math.erfc(x / math.sqrt(2))
