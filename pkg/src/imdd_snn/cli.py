"""Command-line interface.

Every subcommand reads an optional INI file whose sections mirror the
library objects (``[channel]``, ``[train]``, ``[sweep]``, ``[simulate]``,
``[run]``); command-line flags override file values. Outputs carry the fully
resolved configuration in a ``.config.json`` sidecar (CSV) or inline (JSON).

Exit codes: 0 success, 2 configuration error, 3 runtime abort.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import equalizers as eqz
from . import evaluation, link, neural, training

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    pass


_CHANNEL_KEYS = {f.name for f in dataclasses.fields(link.ChannelConfig)} | {"preset"}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(training.TrainConfig)} - {"channel", "lif"} | {
    f.name for f in dataclasses.fields(neural.LifParams)
}
_SECTIONS = {
    "channel": _CHANNEL_KEYS,
    "train": _TRAIN_KEYS,
    "sweep": {"kinds", "sigma2_db", "lengths_km", "min_errors", "max_symbols", "sigma2_db_length"},
    "simulate": {"count", "sigma2_db"},
    "run": {"seed", "out", "workers"},
}

DEFAULT_SIGMAS = tuple(float(s) for s in range(-15, -24, -1))
DEFAULT_LENGTHS = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)


def _value(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def read_config(path):
    """Parse an INI file into ``{section: {key: value}}``, rejecting unknown names."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        out[section] = {k: _value(v) for k, v in parser[section].items()}
    return out


@dataclasses.dataclass
class RunConfig:
    """Resolved configuration of one command."""

    channel: link.ChannelConfig
    train: dict
    kinds: tuple
    sigma2_db: tuple
    lengths_km: tuple
    sigma2_db_length: float
    stop: evaluation.StopRule
    count: int
    sigma2_db_simulate: float
    seed: int
    out: Path
    workers: int

    def train_config(self, kind, channel=None, sigma2_db_train=None):
        opts = dict(self.train)
        lif = neural.LifParams(**{k: opts.pop(k) for k in list(opts) if k in _LIF_KEYS})
        opts["kind"] = kind
        opts.setdefault("seed", self.seed)
        if sigma2_db_train is not None:
            opts["sigma2_db_train"] = sigma2_db_train
        return training.TrainConfig(channel=channel or self.channel, lif=lif, **opts)

    def echo(self):
        return {
            "channel": self.channel.to_dict(),
            "train": dict(self.train),
            "sweep": {
                "kinds": list(self.kinds),
                "sigma2_db": list(self.sigma2_db),
                "lengths_km": list(self.lengths_km),
                "sigma2_db_length": self.sigma2_db_length,
                "min_errors": self.stop.min_errors,
                "max_symbols": self.stop.max_symbols,
            },
            "simulate": {"count": self.count, "sigma2_db": self.sigma2_db_simulate},
            "run": {"seed": self.seed, "out": str(self.out), "workers": self.workers},
        }


_LIF_KEYS = {f.name for f in dataclasses.fields(neural.LifParams)}


def _as_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


def resolve(args):
    """Merge config file and flags into a :class:`RunConfig`."""
    doc = read_config(args.config) if args.config else {}
    ch = dict(doc.get("channel", {}))
    if args.channel is not None:
        ch["preset"] = args.channel
    if "preset" not in ch:
        raise ConfigError("a channel preset is required ([channel] preset = A|B or --channel)")
    preset = ch.pop("preset")
    if "constellation" in ch:
        ch["constellation"] = tuple(ch["constellation"])
    try:
        channel = link.preset_channel(preset, **ch)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid channel: {exc}") from exc

    train = dict(doc.get("train", {}))
    for flag in ("kind", "lr", "batches", "batch_symbols"):
        v = getattr(args, flag, None)
        if v is not None:
            train[flag] = v
    sw = doc.get("sweep", {})
    sim = doc.get("simulate", {})
    run = doc.get("run", {})
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    out = args.out if args.out is not None else run.get("out", "out")
    workers = args.workers if args.workers is not None else run.get("workers", evaluation.default_workers())
    kinds = _as_tuple(sw.get("kinds", eqz.KINDS))
    if getattr(args, "kinds", None):
        kinds = tuple(args.kinds.split(","))
    sigmas = _as_tuple(sw.get("sigma2_db", DEFAULT_SIGMAS))
    if getattr(args, "sigma2_db", None):
        sigmas = tuple(float(s) for s in args.sigma2_db.split(","))
    lengths = _as_tuple(sw.get("lengths_km", DEFAULT_LENGTHS))
    if getattr(args, "lengths_km", None):
        lengths = tuple(float(s) for s in args.lengths_km.split(","))
    if not sigmas or not lengths or not kinds:
        raise ConfigError("sweep lists must not be empty")
    for k in kinds:
        if k not in eqz.KINDS:
            raise ConfigError(f"unknown equalizer kind {k!r}; expected one of {', '.join(eqz.KINDS)}")
    try:
        stop = evaluation.StopRule(int(sw.get("min_errors", 100)), int(sw.get("max_symbols", 20_000_000)))
        if stop.min_errors < 100 or stop.max_symbols < 1:
            raise ValueError("min_errors must be >= 100 and max_symbols positive")
        cfg = RunConfig(
            channel=channel,
            train=train,
            kinds=kinds,
            sigma2_db=tuple(float(s) for s in sigmas),
            lengths_km=tuple(float(L) for L in lengths),
            sigma2_db_length=float(sw.get("sigma2_db_length", -21.0)),
            stop=stop,
            count=int(getattr(args, "count", None) or sim.get("count", 10_000)),
            sigma2_db_simulate=float(sim.get("sigma2_db", -20.0)),
            seed=int(seed),
            out=Path(out),
            workers=max(1, int(workers)),
        )
        # validate the training options early
        cfg.train_config(train.get("kind", "SNN_DFE"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


# ---------------------------------------------------------------------------
# commands


def _write_json(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def cmd_simulate(cfg, args):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x51]))
    classes = link.random_classes(cfg.count, rng)
    real = link.simulate_link(classes, cfg.channel, cfg.sigma2_db_simulate, rng)
    path = cfg.out / "simulate.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "tx_class", "rx_symbol"))
        for k, (c, y) in enumerate(zip(real.tx_classes, real.rx_symbols)):
            w.writerow((k, int(c), repr(float(y))))
    _write_json(Path(str(path) + ".config.json"), cfg.echo())
    print(f"wrote {cfg.count} symbols to {path}")


def _train_one(cfg, kind, channel=None, sigma2_db_train=None, tag="", log=None):
    tcfg = cfg.train_config(kind, channel, sigma2_db_train)
    ckpt = cfg.out / f"{kind}_{tcfg.channel.name}{tag}.json"
    eq, report = training.train(tcfg, checkpoint=ckpt, log=log)
    return eq, report


def cmd_train(cfg, args):
    kind = cfg.train.get("kind", "SNN_DFE")
    eq, report = _train_one(cfg, kind, log=print)
    trace = report.loss_trace
    print(f"{kind}: loss {trace[0]:.4f} -> {trace[-1]:.4f}, training SER {report.final_ser:.3e}, "
          f"{report.wall_clock:.1f} s, checkpoint {report.checkpoint}")


def _linear_per_point(cfg, kind, channel):
    seed = cfg.train.get("seed", cfg.seed)
    return lambda s2, L: training.fit_linear(kind, channel.with_length(L), s2, seed)


def cmd_eval(cfg, args):
    if args.checkpoint:
        eq = training.load_checkpoint(args.checkpoint)
        payloads = {eq.kind: eq}
    else:
        payloads = {k: _linear_per_point(cfg, k, cfg.channel) for k in cfg.kinds if k in ("LMMSE", "CDFE")}
        if not payloads:
            raise ConfigError("eval needs --checkpoint for neural equalizers")
    plan = evaluation.SweepPlan(
        cfg.channel, tuple(payloads), cfg.sigma2_db, None, cfg.stop, cfg.seed, args.genie_feedback
    )
    records = evaluation.sweep(plan, payloads, cfg.workers)
    _emit(records, cfg, "eval.csv")


def _emit(records, cfg, name):
    path = cfg.out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_csv(records, path, cfg.echo())
    for r in records:
        print(f"{r.equalizer:>12s} sigma2={r.sigma2_db:6.1f} dB L={r.length_km:4.1f} km  "
              f"BER={r.ber:.3e}  ({r.sym_errors} errors / {r.symbols})")
    print(f"wrote {path}")


def cmd_sweep_sigma(cfg, args):
    payloads = {}
    for kind in cfg.kinds:
        if kind in ("LMMSE", "CDFE"):
            payloads[kind] = _linear_per_point(cfg, kind, cfg.channel)
        elif args.train_per_point:
            trained = {s2: _train_one(cfg, kind, sigma2_db_train=s2, tag=f"_t{s2:g}")[0] for s2 in cfg.sigma2_db}
            payloads[kind] = lambda s2, L, t=trained: t[s2]
        else:
            payloads[kind] = _train_one(cfg, kind)[0]
    kinds = cfg.kinds
    if args.genie_feedback:
        kinds = tuple(k for k in kinds if k in eqz.DFE_KINDS)
    plan = evaluation.SweepPlan(cfg.channel, kinds, cfg.sigma2_db, None, cfg.stop, cfg.seed, args.genie_feedback)
    _emit(evaluation.sweep(plan, payloads, cfg.workers), cfg, "sweep_sigma.csv")


def cmd_sweep_length(cfg, args):
    payloads = {}
    for kind in cfg.kinds:
        if kind in ("LMMSE", "CDFE"):
            payloads[kind] = _linear_per_point(cfg, kind, cfg.channel)
        else:
            # networks are trained separately for every fiber length
            trained = {
                L: _train_one(cfg, kind, channel=cfg.channel.with_length(L), tag=f"_{L:g}km")[0]
                for L in cfg.lengths_km
            }
            payloads[kind] = lambda s2, L, t=trained: t[L]
    kinds = cfg.kinds
    if args.genie_feedback:
        kinds = tuple(k for k in kinds if k in eqz.DFE_KINDS)
    plan = evaluation.SweepPlan(
        cfg.channel, kinds, (cfg.sigma2_db_length,), cfg.lengths_km, cfg.stop, cfg.seed, args.genie_feedback
    )
    _emit(evaluation.sweep(plan, payloads, cfg.workers), cfg, "sweep_length.csv")


def cmd_taps(cfg, args):
    taps = link.estimate_effective_taps(cfg.channel, args.energy_fraction)
    doc = {"channel": cfg.channel.name, "estimated_taps": taps, "configured_n_tap": cfg.channel.n_tap,
           "energy_fraction": args.energy_fraction, "config": cfg.echo()}
    _write_json(cfg.out / "taps.json", doc)
    print(f"channel {cfg.channel.name}: {taps} significant taps (configured n_tap = {cfg.channel.n_tap})")


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-sigma": cmd_sweep_sigma,
    "sweep-length": cmd_sweep_length,
    "taps": cmd_taps,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--channel", help="channel preset (A or B); overrides [channel] preset")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel sweep workers (default: available cores)")

    parser = argparse.ArgumentParser(prog="imdd-snn", description="IM/DD link equalization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write (tx class, rx symbol) pairs as CSV")
    p.add_argument("--count", type=int, help="number of symbols")

    p = sub.add_parser("train", parents=[common], help="train one equalizer and write its checkpoint")
    p.add_argument("--kind", choices=eqz.KINDS)
    p.add_argument("--lr", type=float)
    p.add_argument("--batches", type=int)
    p.add_argument("--batch-symbols", dest="batch_symbols", type=int)

    p = sub.add_parser("eval", parents=[common], help="measure the BER of a checkpoint or a linear baseline")
    p.add_argument("--checkpoint")
    p.add_argument("--sigma2-db", dest="sigma2_db", help="comma-separated noise levels in dB")
    p.add_argument("--kinds", help="comma-separated linear kinds when no checkpoint is given")
    p.add_argument("--genie-feedback", action="store_true", help="feed back true symbols (diagnostic)")

    for name, helptext in (("sweep-sigma", "BER versus noise level"), ("sweep-length", "BER versus fiber length")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--kinds", help="comma-separated equalizer kinds")
        p.add_argument("--genie-feedback", action="store_true", help="feed back true symbols (diagnostic)")
        if name == "sweep-sigma":
            p.add_argument("--sigma2-db", dest="sigma2_db", help="comma-separated noise levels in dB")
            p.add_argument("--train-per-point", action="store_true",
                           help="train the networks at every noise level instead of once")
        else:
            p.add_argument("--lengths-km", dest="lengths_km", help="comma-separated fiber lengths")

    p = sub.add_parser("taps", parents=[common], help="estimate the number of significant channel taps")
    p.add_argument("--energy-fraction", dest="energy_fraction", type=float, default=0.99)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except eqz.LayoutError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (training.TrainingDiverged, training.CheckpointError, OSError, FloatingPointError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
