"""Equalizers and the streaming decision-feedback loop.

Six kinds share one interface: linear MMSE (``LMMSE``), classical DFE
(``CDFE``), and the neural equalizers with and without decision feedback
(``NF_ANN``, ``ANN_DFE``, ``NF_SNN``, ``SNN_DFE``).

Window conventions, for symbol index ``k``:

* DFE feedforward: ``(rx[k+n-1], ..., rx[k])`` -- the current sample plus
  ``n - 1`` look-ahead samples.
* DFE feedback: ``(a[k-1], ..., a[k-m])`` -- most recent decision first.
* Received-only (NF and LMMSE) window of ``n_tap`` samples centered on ``k``,
  ordered ``(rx[k+h], ..., rx[k-h])`` with ``h = n_tap // 2``.

Samples outside the stream read as 0; feedback slots before the stream start
hold :data:`PAD_CLASS`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg

from . import neural

KINDS = ("LMMSE", "CDFE", "NF_ANN", "ANN_DFE", "NF_SNN", "SNN_DFE")
DFE_KINDS = ("CDFE", "ANN_DFE", "SNN_DFE")
NEURAL_KINDS = ("NF_ANN", "ANN_DFE", "NF_SNN", "SNN_DFE")
PAD_CLASS = 0


class LayoutError(ValueError):
    """Model input geometry does not fit the requested window."""


@dataclass(frozen=True)
class WindowSpec:
    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError(f"invalid window ({self.n}, {self.m})")

    @property
    def n_tap(self):
        return self.n + self.m


def window_spec(n_tap):
    """Split ``n_tap`` into ``n = ceil(n_tap/2)`` received and ``m = floor(n_tap/2)`` fed-back symbols."""
    if n_tap < 1 or n_tap % 2 == 0:
        raise ValueError(f"n_tap must be odd and >= 1, got {n_tap}")
    return WindowSpec(n=(n_tap + 1) // 2, m=n_tap // 2)


def nf_spec(n_tap):
    """Received-only window of ``n_tap`` samples."""
    if n_tap < 1 or n_tap % 2 == 0:
        raise ValueError(f"n_tap must be odd and >= 1, got {n_tap}")
    return WindowSpec(n=n_tap, m=0)


def build_window(k, rx, decisions, spec):
    """Feedforward samples and fed-back classes for symbol ``k``."""
    if k < 0:
        raise ValueError("symbol index must be non-negative")
    rx = np.asarray(rx)
    ff = np.array([rx[j] if j < len(rx) else 0.0 for j in range(k + spec.n - 1, k - 1, -1)])
    fb = np.array([decisions[j] if j >= 0 else PAD_CLASS for j in range(k - 1, k - spec.m - 1, -1)], dtype=int)
    return ff, fb


def feedforward_windows(rx, n):
    """Row ``k`` holds ``(rx[k+n-1], ..., rx[k])``; works on the last axis."""
    rx = np.asarray(rx, dtype=float)
    pad = np.zeros(rx.shape[:-1] + (n - 1,))
    return sliding_window_view(np.concatenate([rx, pad], axis=-1), n, axis=-1)[..., ::-1]


def centered_windows(rx, n_tap):
    """Row ``k`` holds ``(rx[k+h], ..., rx[k-h])`` with ``h = n_tap // 2``."""
    rx = np.asarray(rx, dtype=float)
    h = n_tap // 2
    pad = np.zeros(rx.shape[:-1] + (h,))
    return sliding_window_view(np.concatenate([pad, rx, pad], axis=-1), n_tap, axis=-1)[..., ::-1]


def feedback_windows(classes, m):
    """Row ``k`` holds ``(c[k-1], ..., c[k-m])`` padded with :data:`PAD_CLASS`."""
    classes = np.asarray(classes)
    if m == 0:
        return np.zeros(classes.shape + (0,), dtype=classes.dtype)
    pad = np.full(classes.shape[:-1] + (m,), PAD_CLASS, dtype=classes.dtype)
    ext = np.concatenate([pad, classes], axis=-1)
    return sliding_window_view(ext, m, axis=-1)[..., :-1, ::-1]


def slice_nearest(estimates, constellation):
    """Class of the nearest amplitude; exact midpoints go to the lower class."""
    c = np.asarray(constellation, dtype=float)
    thresholds = 0.5 * (c[1:] + c[:-1])
    return np.searchsorted(thresholds, np.asarray(estimates), side="left")


@dataclass
class LinearFilter:
    """Linear estimator ``w_ff . ff + w_fb . amp(fb) + bias`` followed by a slicer."""

    feedforward: np.ndarray
    feedback: np.ndarray
    bias: float
    constellation: tuple
    residual: float = 0.0

    def estimate(self, ff, fb_amplitudes=None):
        out = np.asarray(ff) @ self.feedforward + self.bias
        if self.feedback.size:
            out = out + np.asarray(fb_amplitudes) @ self.feedback
        return out


def _ridge_lstsq(X, y):
    """Least squares with the small Tikhonov term ``1e-8 * trace(X'X) / len(X)``."""
    G = X.T @ X
    lam = 1e-8 * np.trace(G) / X.shape[0]
    try:
        coef = linalg.solve(G + lam * np.eye(G.shape[0]), X.T @ y, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError(f"least-squares system is singular: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise linalg.LinAlgError("least-squares solution is not finite")
    resid = float(np.mean((X @ coef - y) ** 2))
    return coef, resid


def _check_pilot(pilot_rx, pilot_classes, n_tap):
    if len(pilot_rx) != len(pilot_classes):
        raise ValueError("pilot samples and classes differ in length")
    if len(pilot_rx) < 100 * n_tap:
        raise ValueError(f"need at least {100 * n_tap} pilot symbols, got {len(pilot_rx)}")


def lmmse_fit(pilot_rx, pilot_classes, n_tap, constellation):
    """Data-aided least-squares linear equalizer on a centered ``n_tap`` window."""
    _check_pilot(pilot_rx, pilot_classes, n_tap)
    amps = np.asarray(constellation, dtype=float)[np.asarray(pilot_classes)]
    X = centered_windows(pilot_rx, n_tap)
    X = np.hstack([X, np.ones((X.shape[0], 1))])
    coef, resid = _ridge_lstsq(X, amps)
    return LinearFilter(coef[:-1], np.zeros(0), float(coef[-1]), tuple(constellation), resid)


def cdfe_fit(pilot_rx, pilot_classes, spec, constellation):
    """Least-squares DFE: feedforward taps on received samples, feedback taps on true past amplitudes."""
    _check_pilot(pilot_rx, pilot_classes, spec.n_tap)
    c = np.asarray(constellation, dtype=float)
    cls = np.asarray(pilot_classes)
    X = np.hstack(
        [
            feedforward_windows(pilot_rx, spec.n),
            c[feedback_windows(cls, spec.m)],
            np.ones((len(cls), 1)),
        ]
    )
    coef, resid = _ridge_lstsq(X, c[cls])
    return LinearFilter(
        coef[: spec.n], coef[spec.n : spec.n + spec.m], float(coef[-1]), tuple(constellation), resid
    )


def lmmse_decide(filt, window):
    return slice_nearest(filt.estimate(window), filt.constellation)


@dataclass
class Equalizer:
    """A fitted or trained equalizer of one kind with its window geometry."""

    kind: str
    payload: object
    spec: WindowSpec
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown equalizer kind {self.kind!r}")
        if not self.uses_feedback and self.spec.m:
            raise LayoutError(f"{self.kind} takes no decision feedback")
        self._check_layout()

    @property
    def uses_feedback(self):
        return self.kind in DFE_KINDS

    def _check_layout(self):
        p = self.payload
        if isinstance(p, neural.SnnModel):
            n, m, _ = p.layout
        elif isinstance(p, neural.AnnModel):
            n, m = p.layout
        elif isinstance(p, LinearFilter):
            n, m = p.feedforward.size, p.feedback.size
        else:
            raise TypeError(f"unsupported payload {type(p).__name__}")
        if (n, m) != (self.spec.n, self.spec.m):
            raise LayoutError(
                f"{self.kind} payload expects window ({n}, {m}), equalizer uses ({self.spec.n}, {self.spec.m})"
            )

    def windows(self, rx):
        """Feedforward windows for every symbol of ``rx`` (last axis)."""
        if self.uses_feedback:
            return feedforward_windows(rx, self.spec.n)
        return centered_windows(rx, self.spec.n)

    def decide(self, ff, fb=None, chunk=4096):
        """Decisions for a batch of windows (``ff``: ``(B, n)``, ``fb``: ``(B, m)``)."""
        p = self.payload
        ff = np.asarray(ff, dtype=float).reshape(-1, self.spec.n)
        fb = None if not self.spec.m else np.asarray(fb).reshape(-1, self.spec.m)
        if isinstance(p, LinearFilter):
            amps = None if fb is None else np.asarray(p.constellation)[fb]
            return slice_nearest(p.estimate(ff, amps), p.constellation)
        out = np.empty(ff.shape[0], dtype=np.int64)
        for lo in range(0, ff.shape[0], chunk):
            out[lo : lo + chunk] = p.decide(ff[lo : lo + chunk], None if fb is None else fb[lo : lo + chunk])
        return out


def snn_dfe_decide(window, model):
    ff, fb = window
    n, m, _ = model.layout
    if len(ff) != n or len(fb) != m:
        raise LayoutError(f"window ({len(ff)}, {len(fb)}) does not match model layout {model.layout}")
    return int(model.decide(ff[None], np.asarray(fb)[None])[0])


def ann_dfe_decide(window, model):
    ff, fb = window
    n, m = model.layout
    if len(ff) != n or len(fb) != m:
        raise LayoutError(f"window ({len(ff)}, {len(fb)}) does not match model layout {model.layout}")
    return int(model.decide(ff[None], np.asarray(fb)[None])[0])


def nf_decide(window, model):
    ff = np.asarray(window, dtype=float)
    n = model.layout[0]
    if len(ff) != n or model.layout[1] != 0:
        raise LayoutError(f"window of {len(ff)} samples does not match model layout {model.layout}")
    return int(model.decide(ff[None])[0])


class _FeedbackStepper:
    """Per-symbol decision function for DFE kinds.

    The feedforward contribution of all windows is computed block-wise up
    front; only the feedback part is added inside the sequential loop.
    """

    block = 256

    def __init__(self, eq, ff):
        self.eq = eq
        self.ff = ff
        self.k0 = self.k1 = 0
        p = eq.payload
        n, m = eq.spec.n, eq.spec.m
        if isinstance(p, LinearFilter):
            self.fb_table = np.asarray(p.constellation)[None, :] * p.feedback[:, None]  # (m, 4)
        elif isinstance(p, neural.AnnModel):
            self.fb_table = p.W1[:, n:].T.reshape(m, neural.N_CLASSES, -1)
        else:
            self.fb_table = p.W_in[:, n * p.layout[2] :].T.reshape(m, neural.N_CLASSES, -1)
        self.rows = np.arange(m)

    def _prepare(self, k):
        p = self.eq.payload
        self.k0, self.k1 = k, min(k + self.block, self.ff.shape[1])
        ff = self.ff[:, self.k0 : self.k1]
        S, K, n = ff.shape
        if isinstance(p, LinearFilter):
            self.base = ff @ p.feedforward + p.bias
        elif isinstance(p, neural.AnnModel):
            self.base = ff @ p.W1[:, :n].T + p.b1
        else:
            M_t = p.layout[2]
            spk = neural.encode_ternary(ff.reshape(S * K, n), p.scale, M_t, 2)
            spk = spk.reshape(S * K, n * M_t, 2).astype(float)
            cur = np.einsum("hi,bit->bht", p.W_in[:, : n * M_t], spk, optimize=True)
            self.base = cur.reshape(S, K, p.n_hidden, 2)

    def __call__(self, k, fb):
        if not self.k0 <= k < self.k1:
            self._prepare(k)
        p = self.eq.payload
        base = self.base[:, k - self.k0]
        fb_part = self.fb_table[self.rows[None, :], fb].sum(axis=1)
        if isinstance(p, LinearFilter):
            return slice_nearest(base + fb_part, p.constellation)
        if isinstance(p, neural.AnnModel):
            h = np.maximum(base + fb_part, 0.0)
            return neural.argmax_decision(h @ p.W2.T + p.b2)
        cur = (base + fb_part[:, :, None])[..., np.arange(p.T) % 2]
        return neural.argmax_decision(p.forward_currents(cur))


def equalize_stream(eq, rx, genie=None, forced=None):
    """Equalize one stream (1-D ``rx``) or several independent streams (2-D).

    DFE kinds feed back their own decisions unless ``genie`` supplies the
    true classes. ``forced`` maps a symbol index to a class that replaces the
    decision at that position (for error-propagation experiments).
    """
    rx = np.asarray(rx, dtype=float)
    single = rx.ndim == 1
    rx2 = rx[None] if single else rx
    S, K = rx2.shape
    ff = eq.windows(rx2)
    m = eq.spec.m
    if m == 0:
        fb = np.zeros((S * K, 0), dtype=np.int64) if eq.uses_feedback else None
        out = eq.decide(ff.reshape(-1, eq.spec.n), fb).reshape(S, K)
        for k, c in (forced or {}).items():
            out[:, k] = c
        return out[0] if single else out

    step = _FeedbackStepper(eq, ff)
    source = None if genie is None else np.asarray(genie).reshape(S, K)
    decisions = np.zeros((S, K), dtype=np.int64)
    history = np.full((S, m), PAD_CLASS, dtype=np.int64)  # history[:, j] = a[k-1-j]
    for k in range(K):
        d = step(k, history)
        if forced and k in forced:
            d = np.full(S, forced[k])
        decisions[:, k] = d
        fed = d if source is None else source[:, k]
        history[:, 1:] = history[:, :-1]
        history[:, 0] = fed
    return decisions[0] if single else decisions
