"""Monte-Carlo BER measurement, sweeps and published reference values."""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import equalizers as eqz
from . import link, training

CSV_HEADER = (
    "channel",
    "equalizer",
    "sigma2_db",
    "length_km",
    "symbols",
    "sym_errors",
    "bit_errors",
    "ser",
    "ber",
    "seed",
    "reliable",
)

_MEASURE = 4  # SeedSequence tag for evaluation data


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_symbols: int = 20_000_000


@dataclass(frozen=True)
class BerRecord:
    channel: str
    equalizer: str
    sigma2_db: float
    length_km: float
    symbols: int
    sym_errors: int
    bit_errors: int
    seed: int
    reliable: bool

    def __post_init__(self):
        if self.symbols < 1:
            raise ValueError("a record needs at least one counted symbol")
        if not self.sym_errors <= self.bit_errors <= 2 * self.sym_errors:
            raise ValueError("each symbol error must account for one or two bit errors")

    @property
    def ser(self):
        return self.sym_errors / self.symbols

    @property
    def ber(self):
        return self.bit_errors / (2 * self.symbols)

    def row(self):
        return (
            self.channel,
            self.equalizer,
            repr(float(self.sigma2_db)),
            repr(float(self.length_km)),
            str(self.symbols),
            str(self.sym_errors),
            str(self.bit_errors),
            repr(self.ser),
            repr(self.ber),
            str(self.seed),
            str(self.reliable).lower(),
        )


def measure_ber(
    eq,
    channel,
    sigma2_db,
    seed,
    stop=StopRule(),
    genie=False,
    streams=32,
    stream_symbols=8192,
):
    """Count symbol and bit errors of ``eq`` on fresh link realizations.

    Each chunk is one realization of ``streams * stream_symbols`` symbols,
    cut into ``streams`` rows that are equalized in parallel. The first and
    last ``n_tap // 2`` symbols of each row are not counted. Chunks are drawn
    until ``stop.min_errors`` symbol errors or ``stop.max_symbols`` counted
    symbols are reached; chunk ``i`` always uses the same random stream, so
    the record does not depend on ``stop.max_symbols`` once the error target
    is met.

    Parameters
    ----------
    eq : Equalizer
    channel : ChannelConfig
    sigma2_db : float or None
    seed : int
    stop : StopRule
    genie : bool
        Feed true past symbols back instead of decisions (DFE kinds only).

    Returns
    -------
    BerRecord
    """
    training.check_geometry(eq, channel)
    if stop.min_errors < 1 or stop.max_symbols < 1:
        raise ValueError("stop rule limits must be positive")
    edge = channel.n_tap // 2
    if stream_symbols <= 2 * edge:
        raise ValueError("stream_symbols too short for the warm-up exclusion")
    symbols = sym_err = bit_err = 0
    chunk = 0
    while sym_err < stop.min_errors and symbols < stop.max_symbols:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), _MEASURE, chunk]))
        classes = link.random_classes(streams * stream_symbols, rng)
        rx = link.simulate_link(classes, channel, sigma2_db, rng).rx_symbols
        classes = classes.reshape(streams, stream_symbols)
        decided = eqz.equalize_stream(
            eq, rx.reshape(streams, stream_symbols), genie=classes if genie else None
        )
        tx, rx_cls = classes[:, edge : stream_symbols - edge], decided[:, edge : stream_symbols - edge]
        symbols += tx.size
        sym_err += int(np.count_nonzero(tx != rx_cls))
        bit_err += link.bit_errors(tx, rx_cls)
        chunk += 1
    return BerRecord(
        channel=channel.name,
        equalizer=eq.kind + ("_genie" if genie else ""),
        sigma2_db=float(sigma2_db) if sigma2_db is not None else float("-inf"),
        length_km=float(channel.length_km),
        symbols=symbols,
        sym_errors=sym_err,
        bit_errors=bit_err,
        seed=int(seed),
        reliable=sym_err >= stop.min_errors,
    )


@dataclass(frozen=True)
class SweepPlan:
    """Evaluation grid: every kind at every (sigma2_db, length_km) point."""

    channel: link.ChannelConfig
    kinds: tuple
    sigma2_db: tuple = (-20.0,)
    lengths_km: tuple | None = None
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    genie: bool = False

    def __post_init__(self):
        if not self.kinds:
            raise ValueError("sweep needs at least one equalizer kind")
        if not self.sigma2_db:
            raise ValueError("sweep needs at least one noise level")
        if self.lengths_km is not None and not self.lengths_km:
            raise ValueError("length list is empty")
        if self.stop.min_errors < 100:
            raise ValueError("reported points need a stop rule of at least 100 errors")
        for k in self.kinds:
            if k not in eqz.KINDS:
                raise ValueError(f"unknown equalizer kind {k!r}")
        if self.genie and not all(k in eqz.DFE_KINDS for k in self.kinds):
            raise ValueError("genie feedback only applies to DFE kinds")

    def points(self):
        """``(index, sigma2_db, length_km)`` in a fixed order."""
        lengths = self.lengths_km if self.lengths_km is not None else (self.channel.length_km,)
        grid = [(s, L) for L in lengths for s in self.sigma2_db]
        return [(i, float(s), float(L)) for i, (s, L) in enumerate(grid)]

    def point_seed(self, index):
        """Seed shared by all kinds at one point, so their errors are paired."""
        return int(np.random.SeedSequence([int(self.seed), index]).generate_state(1)[0])


def _measure_task(args):
    eq, channel, sigma2, seed, stop, genie = args
    return measure_ber(eq, channel, sigma2, seed, stop, genie)


def sweep(plan, payloads, workers=1):
    """Measure every kind of ``plan`` at every point.

    ``payloads`` maps a kind to an :class:`~imdd_snn.equalizers.Equalizer`
    (used at all points) or to a callable ``(sigma2_db, length_km) ->
    Equalizer`` (one payload per point, e.g. trained per noise level).
    Records come back in plan order regardless of ``workers``.
    """
    tasks = []
    for index, s2, L in plan.points():
        ch = plan.channel.with_length(L)
        for kind in plan.kinds:
            if kind not in payloads:
                raise KeyError(f"no payload for {kind} at sigma2={s2} dB, L={L} km")
            p = payloads[kind]
            eq = p(s2, L) if callable(p) else p
            if eq is None:
                raise KeyError(f"no payload for {kind} at sigma2={s2} dB, L={L} km")
            tasks.append((eq, ch, s2, plan.point_seed(index), plan.stop, plan.genie))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            return list(pool.map(_measure_task, tasks))
    return [_measure_task(t) for t in tasks]


def default_workers():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(records, path, config=None):
    """Write records as CSV; ``config`` is echoed to ``<path>.config.json``."""
    path = os.fspath(path)
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))
    if config is not None:
        with open(path + ".config.json", "w") as fh:
            fh.write(json.dumps(config, indent=1, sort_keys=True) + "\n")
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


# ---------------------------------------------------------------------------
# published reference values (BER read from the plotted data)

_SIGMAS = tuple(range(-15, -24, -1))

_FIG2_LEFT = {
    "LMMSE": (0.0212725, 0.01411275, 0.00906, 0.00546375, 0.00323, 0.0018465, 0.001068, 0.00054925, 0.0002945),
    "CDFE": (0.01898833, 0.01266333, 0.00809167, 0.00473, 0.00286667, 0.001685, 0.00097167, 0.00052167, 0.00032),
    "REF_ANN": (0.02, 0.012, 0.007, 0.0035, 0.002, 0.001, 0.0005, 0.00025, 0.00015),
    "REF_SNN": (0.02, 0.012, 0.007, 0.0035, 0.002, 0.001, 0.0005, 0.0002, 0.0000857),
    "NF_ANN": (1.74515508e-02, 1.05944499e-02, 5.90205006e-03, 2.98424996e-03, 1.32990000e-03,
               5.30150020e-04, 1.64800003e-04, 4.34499998e-05, 7.90000013e-06),
    "ANN_DFE": (1.62663497e-02, 9.63644963e-03, 5.24469977e-03, 2.57815002e-03, 1.11730001e-03,
                4.17100004e-04, 1.30000000e-04, 3.18499988e-05, 7.09999995e-06),
    "NF_SNN": (1.59850493e-02, 9.44800023e-03, 5.13949990e-03, 2.56250007e-03, 1.12775003e-03,
               4.43149998e-04, 1.43450001e-04, 4.13000016e-05, 9.20000002e-06),
    "SNN_DFE": (1.57458000e-02, 9.16939974e-03, 4.93030017e-03, 2.37015006e-03, 1.02590001e-03,
                3.84699990e-04, 1.18199998e-04, 3.12500015e-05, 6.14999999e-06),
}

_FIG2_MIDDLE = {
    "NF_ANN": (2.63186991e-02, 1.69010498e-02, 1.01857996e-02, 5.61645022e-03, 2.85420008e-03,
               1.28864998e-03, 5.06200013e-04, 1.77199996e-04, 5.79500011e-05),
    "ANN_DFE": (2.43450496e-02, 1.49376504e-02, 8.44809972e-03, 4.27789986e-03, 1.94244995e-03,
                7.52250024e-04, 2.59599998e-04, 7.21499964e-05, 1.80999996e-05),
    "NF_SNN": (2.22693495e-02, 1.37985498e-02, 7.99554959e-03, 4.28130012e-03, 2.07949989e-03,
               9.58000019e-04, 4.12199995e-04, 1.72300002e-04, 7.62499985e-05),
    "SNN_DFE": (2.12833006e-02, 1.24191996e-02, 6.47879997e-03, 3.00185010e-03, 1.22135004e-03,
                4.27999999e-04, 1.26150000e-04, 3.11000003e-05, 5.89999991e-06),
}

# trained at each noise level instead of at -17 dB
_FIG2_RIGHT_PER_POINT = {
    "NF_SNN": (2.22980995e-02, 1.34347500e-02, 7.99894985e-03, 4.36295010e-03, 2.25095008e-03,
               1.06529996e-03, 5.27700002e-04, 2.49600009e-04, 1.31499997e-04),
    "SNN_DFE": (2.06211992e-02, 1.21170497e-02, 6.49964996e-03, 3.04864999e-03, 1.40904996e-03,
                6.29900023e-04, 2.21099996e-04, 1.04649997e-04, 5.07500008e-05),
}

_LENGTHS = (1, 2, 3, 4, 5, 6)
_FIG3 = {
    "NF_ANN": (2.7000001e-06, 4.69999986e-06, 1.08499999e-05, 4.80999988e-05, 0.00046935, 0.0153555),
    "NF_SNN": (9.00000032e-06, 9.00000032e-06, 2.30000005e-05, 6.19999992e-05, 0.000484, 0.011484),
    "ANN_DFE": (3.05000003e-06, 4.74999979e-06, 1.09000002e-05, 4.01500001e-05, 0.00029565, 0.01682055),
    "SNN_DFE": (4.34999993e-06, 5.94999983e-06, 1.00500001e-05, 3.36999983e-05, 0.00013465, 0.01081155),
}

_TABLES = {
    "fig2-left": (_FIG2_LEFT, _SIGMAS),
    "fig2-middle": (_FIG2_MIDDLE, _SIGMAS),
    "fig2-right": (
        {**{k: v for k, v in _FIG2_MIDDLE.items() if k in _FIG2_RIGHT_PER_POINT},
         **{k + "_PER_POINT": v for k, v in _FIG2_RIGHT_PER_POINT.items()}},
        _SIGMAS,
    ),
    "fig3": (_FIG3, _LENGTHS),
}

# channel and the fixed coordinate of each figure
FIGURES = {
    "fig2-left": ("A", "sigma2_db", 5.0),
    "fig2-middle": ("B", "sigma2_db", 5.0),
    "fig2-right": ("B", "sigma2_db", 5.0),
    "fig3": ("B", "length_km", -21.0),
}


def paper_reference(figure, series, point):
    """Published BER of ``series`` in ``figure`` at ``point``.

    ``point`` is the noise level in dB (negative) for the Fig. 2 panels and
    the fiber length in km for Fig. 3.

    >>> paper_reference("fig2-left", "SNN_DFE", -20)
    0.00038469999
    """
    try:
        table, axis = _TABLES[figure.lower()]
    except KeyError:
        raise KeyError(f"unknown figure {figure!r}; known: {sorted(_TABLES)}") from None
    if series not in table:
        raise KeyError(f"{figure} has no series {series!r}; known: {sorted(table)}")
    matches = [i for i, x in enumerate(axis) if np.isclose(x, point)]
    if not matches:
        raise KeyError(f"{figure} has no point {point!r}; known: {list(axis)}")
    return table[series][matches[0]]


def reference_series(figure):
    table, axis = _TABLES[figure.lower()]
    return {k: dict(zip(axis, v)) for k, v in table.items()}


def record_dicts(records):
    return [{**asdict(r), "ser": r.ser, "ber": r.ber} for r in records]
