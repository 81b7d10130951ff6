"""Supervised training of the neural equalizers and fitting of the linear ones."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import equalizers as eqz
from . import link, neural

CHECKPOINT_FORMAT = "imdd-snn-equalizer"
CHECKPOINT_VERSION = 1

# Optimizer settings for the reduced 200 x 10 000-symbol budget: several Adam
# steps per batch and a cosine-annealed rate. The symbol budget is unchanged.
DESK_RECIPE = {"lr": 1e-2, "lr_final": 1e-4, "steps_per_batch": 50}

# substream tags for SeedSequence
_BATCH, _INIT, _PILOT = 1, 2, 3


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


def default_hidden(channel):
    """Hidden width used for a channel: 40 for the short channel, 80 for the long one."""
    return 40 if channel.n_tap <= 17 else 80


@dataclass
class TrainConfig:
    channel: link.ChannelConfig
    kind: str = "SNN_DFE"
    n_hidden: int | None = None
    lr: float = 1e-3
    batches: int = 200
    batch_symbols: int = 10_000
    sigma2_db_train: float = -17.0
    seed: int = 0
    T: int = 20
    lif: neural.LifParams = field(default_factory=neural.LifParams)
    M_t: int = 8
    teacher_forcing: bool = True
    pilot_symbols: int = 50_000
    chunk: int = 2500
    steps_per_batch: int = 1
    lr_final: float | None = None

    def __post_init__(self):
        if self.kind not in eqz.KINDS:
            raise ValueError(f"unknown equalizer kind {self.kind!r}")
        if self.n_hidden is None:
            self.n_hidden = default_hidden(self.channel)
        if self.batches < 1:
            raise ValueError("batches must be >= 1")
        if self.batch_symbols <= 10 * self.channel.n_tap:
            raise ValueError(f"batch_symbols must exceed 10 * n_tap = {10 * self.channel.n_tap}")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if self.lr_final is not None and self.lr_final < 0:
            raise ValueError("final learning rate must be non-negative")
        if self.steps_per_batch < 1 or self.batch_symbols % self.steps_per_batch:
            raise ValueError("steps_per_batch must be >= 1 and divide batch_symbols")
        if self.n_hidden < 1 or self.T < 2 or self.M_t < 1:
            raise ValueError("n_hidden, T and M_t must be positive (T >= 2)")

    @property
    def spec(self):
        if self.kind in eqz.DFE_KINDS:
            return eqz.window_spec(self.channel.n_tap)
        return eqz.nf_spec(self.channel.n_tap)

    def to_dict(self):
        d = asdict(self)
        d["channel"] = self.channel.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["channel"] = link.ChannelConfig.from_dict(d["channel"])
        d["lif"] = neural.LifParams(**d["lif"])
        return cls(**d)


@dataclass
class Batch:
    feedforward: np.ndarray
    feedback: np.ndarray
    labels: np.ndarray
    feedback_source: str  # "truth" under teacher forcing


@dataclass
class TrainReport:
    loss_trace: list
    final_ser: float
    wall_clock: float
    config: dict
    checkpoint: str | None = None

    def to_json(self):
        return json.dumps(asdict(self), indent=1)


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *tags]))


def make_batch(cfg, batch_index):
    """Fresh link realization for one batch; deterministic in ``(seed, batch_index)``."""
    rng = _rng(cfg.seed, _BATCH, batch_index)
    classes = link.random_classes(cfg.batch_symbols, rng)
    real = link.simulate_link(classes, cfg.channel, cfg.sigma2_db_train, rng)
    spec = cfg.spec
    eq_kind_ff = eqz.feedforward_windows if cfg.kind in eqz.DFE_KINDS else eqz.centered_windows
    ff = eq_kind_ff(real.rx_symbols, spec.n)
    if not cfg.teacher_forcing and spec.m:
        raise NotImplementedError("training without teacher forcing is not supported")
    fb = eqz.feedback_windows(classes, spec.m)
    return Batch(ff, fb, classes, "truth")


def encoder_scale(cfg):
    """Three standard deviations of the received symbols on a dedicated pilot."""
    rng = _rng(cfg.seed, _PILOT)
    classes = link.random_classes(max(cfg.batch_symbols, 10_000), rng)
    rx = link.simulate_link(classes, cfg.channel, cfg.sigma2_db_train, rng).rx_symbols
    return float(3 * np.std(rx))


def init_model(cfg):
    rng = _rng(cfg.seed, _INIT)
    spec = cfg.spec
    if cfg.kind in ("NF_SNN", "SNN_DFE"):
        return neural.SnnModel.initialize(
            (spec.n, spec.m, cfg.M_t), cfg.n_hidden, rng, lif=cfg.lif, T=cfg.T, scale=encoder_scale(cfg)
        )
    if cfg.kind in ("NF_ANN", "ANN_DFE"):
        return neural.AnnModel.initialize((spec.n, spec.m), cfg.n_hidden, rng)
    raise ValueError(f"{cfg.kind} is fitted, not trained")


def learning_rate(cfg, step, total_steps):
    """Constant ``cfg.lr``, or cosine-annealed to ``cfg.lr_final`` when that is set."""
    if cfg.lr_final is None or total_steps < 2:
        return cfg.lr
    frac = step / (total_steps - 1)
    return cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1 + np.cos(np.pi * frac))


def split_batch(batch, parts):
    """Consecutive equal slices of a batch, one per optimizer step."""
    size = len(batch.labels) // parts
    for i in range(parts):
        sl = slice(i * size, (i + 1) * size)
        yield Batch(batch.feedforward[sl], batch.feedback[sl], batch.labels[sl], batch.feedback_source)


def loss_and_grads(model, batch, chunk=2500):
    """Mean cross-entropy over the batch, its gradient, and the number of wrong decisions."""
    total = len(batch.labels)
    grads = {k: np.zeros_like(v) for k, v in model.params().items()}
    loss = 0.0
    wrong = 0
    for lo in range(0, total, chunk):
        sl = slice(lo, lo + chunk)
        ff, labels = batch.feedforward[sl], batch.labels[sl]
        fb = batch.feedback[sl] if batch.feedback.shape[-1] else None
        if isinstance(model, neural.SnnModel):
            logits, caches = model.forward(model.encode(ff, fb))
        else:
            logits, caches = model.forward(model.features(ff, fb))
        part_loss, dlogits = neural.cross_entropy(logits, labels)
        weight = len(labels) / total
        dlogits *= weight
        if isinstance(model, neural.SnnModel):
            part = neural.snn_backward(model, caches, dlogits)
        else:
            part = model.backward(caches, dlogits)
        for k in grads:
            grads[k] += part[k]
        loss += part_loss * weight
        wrong += int(np.sum(neural.argmax_decision(logits) != labels))
    return loss, grads, wrong


def train(cfg, checkpoint=None, log=None):
    """Train a neural equalizer (or fit a linear one) according to ``cfg``.

    Returns ``(equalizer, report)``. With ``checkpoint`` set, the equalizer
    and the report (``<checkpoint>.report.json``) are written to disk.
    """
    start = time.perf_counter()
    if cfg.kind in ("LMMSE", "CDFE"):
        eq = fit_linear(cfg.kind, cfg.channel, cfg.sigma2_db_train, cfg.seed, cfg.pilot_symbols)
        trace, ser = [eq.payload.residual], float("nan")
    else:
        model = init_model(cfg)
        state = neural.AdamState(lr=cfg.lr)
        trace, sers = [], []
        total_steps = cfg.batches * cfg.steps_per_batch
        for b in range(cfg.batches):
            batch = make_batch(cfg, b)
            loss, wrong = 0.0, 0
            for j, part in enumerate(split_batch(batch, cfg.steps_per_batch)):
                state.lr = learning_rate(cfg, b * cfg.steps_per_batch + j, total_steps)
                part_loss, grads, part_wrong = loss_and_grads(model, part, cfg.chunk)
                if not np.isfinite(part_loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise TrainingDiverged(f"non-finite loss or gradient at batch {b} (loss={part_loss})")
                neural.adam_update(model.params(), grads, state)
                loss += part_loss / cfg.steps_per_batch
                wrong += part_wrong
            trace.append(loss)
            sers.append(wrong / len(batch.labels))
            if log is not None and (b % max(1, cfg.batches // 10) == 0 or b == cfg.batches - 1):
                log(f"batch {b:5d}  loss {loss:.5f}  ser {sers[-1]:.4e}")
        tail = max(1, cfg.batches // 10)
        ser = float(np.mean(sers[-tail:]))
        eq = eqz.Equalizer(cfg.kind, model, cfg.spec)
    report = TrainReport(
        loss_trace=[float(v) for v in trace],
        final_ser=ser,
        wall_clock=time.perf_counter() - start,
        config=cfg.to_dict(),
        checkpoint=None if checkpoint is None else str(checkpoint),
    )
    if checkpoint is not None:
        save_checkpoint(eq, cfg, checkpoint)
        Path(str(checkpoint) + ".report.json").write_text(report.to_json())
    return eq, report


def fit_linear(kind, channel, sigma2_db, seed, pilot_symbols=50_000):
    """Fit the LMMSE or CDFE baseline on a seeded pilot block."""
    rng = _rng(seed, _PILOT, 1)
    classes = link.random_classes(pilot_symbols, rng)
    rx = link.simulate_link(classes, channel, sigma2_db, rng).rx_symbols
    if kind == "LMMSE":
        filt = eqz.lmmse_fit(rx, classes, channel.n_tap, channel.constellation)
        return eqz.Equalizer(kind, filt, eqz.nf_spec(channel.n_tap))
    if kind == "CDFE":
        spec = eqz.window_spec(channel.n_tap)
        return eqz.Equalizer(kind, eqz.cdfe_fit(rx, classes, spec, channel.constellation), spec)
    raise ValueError(f"{kind} is not a linear equalizer")


# ---------------------------------------------------------------------------
# checkpoints


def _payload_to_dict(p):
    if isinstance(p, neural.SnnModel):
        return {
            "model": "snn",
            "W_in": p.W_in.tolist(),
            "W_out": p.W_out.tolist(),
            "lif": asdict(p.lif),
            "T": p.T,
            "layout": list(p.layout),
            "scale": p.scale,
        }
    if isinstance(p, neural.AnnModel):
        return {
            "model": "ann",
            "W1": p.W1.tolist(),
            "b1": p.b1.tolist(),
            "W2": p.W2.tolist(),
            "b2": p.b2.tolist(),
            "layout": list(p.layout),
        }
    return {
        "model": "linear",
        "feedforward": p.feedforward.tolist(),
        "feedback": p.feedback.tolist(),
        "bias": p.bias,
        "constellation": list(p.constellation),
        "residual": p.residual,
    }


def _payload_from_dict(d):
    kind = d["model"]
    if kind == "snn":
        return neural.SnnModel(
            W_in=np.array(d["W_in"], dtype=float),
            W_out=np.array(d["W_out"], dtype=float),
            lif=neural.LifParams(**d["lif"]),
            T=int(d["T"]),
            layout=tuple(d["layout"]),
            scale=float(d["scale"]),
        )
    if kind == "ann":
        return neural.AnnModel(
            W1=np.array(d["W1"], dtype=float),
            b1=np.array(d["b1"], dtype=float),
            W2=np.array(d["W2"], dtype=float),
            b2=np.array(d["b2"], dtype=float),
            layout=tuple(d["layout"]),
        )
    if kind == "linear":
        return eqz.LinearFilter(
            feedforward=np.array(d["feedforward"], dtype=float),
            feedback=np.array(d["feedback"], dtype=float),
            bias=float(d["bias"]),
            constellation=tuple(d["constellation"]),
            residual=float(d["residual"]),
        )
    raise CheckpointError(f"unknown model type {kind!r}")


def save_checkpoint(eq, cfg, path):
    """Write an equalizer as versioned JSON (floats in shortest round-trip form)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": eq.kind,
        "window": [eq.spec.n, eq.spec.m],
        "payload": _payload_to_dict(eq.payload),
        "train_config": None if cfg is None else cfg.to_dict(),
        "seed": None if cfg is None else cfg.seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def load_checkpoint(path):
    """Read an equalizer written by :func:`save_checkpoint`."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a valid checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not an equalizer checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    try:
        payload = _payload_from_dict(doc["payload"])
        spec = eqz.WindowSpec(*doc["window"])
        return eqz.Equalizer(doc["kind"], payload, spec, meta={"train_config": doc.get("train_config")})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, eqz.LayoutError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from exc


def check_geometry(eq, channel):
    """Raise :class:`~imdd_snn.equalizers.LayoutError` if ``eq`` does not fit ``channel``."""
    if eq.spec.n_tap != channel.n_tap:
        raise eqz.LayoutError(
            f"{eq.kind} equalizer spans {eq.spec.n_tap} taps, channel {channel.name} needs {channel.n_tap}"
        )


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
