"""End-to-end IM/DD link: presets, PAM4 mapping and the simulated chain."""
from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import dsp

_GRAY_BITS = ((0, 0), (0, 1), (1, 1), (1, 0))
_BITS_TO_CLASS = {bits: c for c, bits in enumerate(_GRAY_BITS)}
GRAY_TABLE = np.array(_GRAY_BITS, dtype=np.int8)


@dataclass(frozen=True)
class ChannelConfig:
    """Physical description of one IM/DD link.

    ``wavelength`` is in metres, ``D`` in ps/(nm km), ``length_km`` in km.
    ``bias`` is added to the shaped PAM waveform before the fiber. The noise
    variance handed to :func:`simulate_link` is relative to the AC power of
    the noiseless photocurrent, so ``sigma2_db`` acts as an inverse SNR.
    """

    name: str
    baud: float
    wavelength: float
    D: float
    length_km: float
    beta: float
    bias: float
    constellation: tuple
    n_tap: int
    sps: int = 8
    span_symbols: int = 32
    rx_filter: str = "none"

    def __post_init__(self):
        c = np.asarray(self.constellation, dtype=float)
        if c.shape != (4,) or np.any(np.diff(c) <= 0):
            raise ValueError("constellation must hold 4 strictly increasing amplitudes")
        if self.n_tap < 1 or self.n_tap % 2 == 0:
            raise ValueError(f"n_tap must be odd and >= 1, got {self.n_tap}")
        if self.rx_filter not in ("none", "rrc"):
            raise ValueError(f"rx_filter must be 'none' or 'rrc', got {self.rx_filter!r}")
        if self.length_km < 0:
            raise ValueError("length_km must be non-negative")
        object.__setattr__(self, "constellation", tuple(float(v) for v in c))

    @property
    def amplitudes(self):
        return np.asarray(self.constellation)

    @property
    def sample_rate(self):
        return self.baud * self.sps

    def dispersion(self):
        return dsp.DispersionParams.from_engineering(
            self.D, self.wavelength * 1e9, self.length_km, self.sample_rate
        )

    def with_length(self, length_km):
        return replace(self, length_km=float(length_km))

    def to_dict(self):
        d = asdict(self)
        d["constellation"] = list(self.constellation)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{**d, "constellation": tuple(d["constellation"])})


PRESETS = {
    "A": dict(
        name="A",
        baud=100e9,
        wavelength=1270e-9,
        D=-5.0,
        length_km=5.0,
        beta=0.2,
        bias=2.25,
        constellation=(-3.0, -1.0, 1.0, 3.0),
        n_tap=17,
    ),
    "B": dict(
        name="B",
        baud=50e9,
        wavelength=1550e-9,
        D=-17.0,
        length_km=5.0,
        beta=0.2,
        bias=0.25,
        constellation=(0.0, 1.0, float(np.sqrt(2)), float(np.sqrt(3))),
        n_tap=41,
    ),
}


def preset_channel(name, **overrides):
    """Return the channel A or B preset, optionally with fields overridden."""
    try:
        params = PRESETS[str(name).upper()]
    except KeyError:
        raise ValueError(f"unknown channel preset {name!r}; expected one of {sorted(PRESETS)}")
    return ChannelConfig(**{**params, **overrides})


def gray_map(cls):
    """Class index (0..3, ascending amplitude) to its 2-bit Gray label."""
    return GRAY_TABLE[np.asarray(cls)]


def gray_demap(bits):
    bits = np.asarray(bits)
    if bits.ndim == 1:
        return _BITS_TO_CLASS[tuple(int(b) for b in bits)]
    return np.array([_BITS_TO_CLASS[(int(a), int(b))] for a, b in bits])


def bit_errors(tx_classes, rx_classes):
    """Number of differing Gray bits between two class sequences."""
    diff = GRAY_TABLE[np.asarray(tx_classes)] != GRAY_TABLE[np.asarray(rx_classes)]
    return int(diff.sum())


def random_classes(count, rng):
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    return rng.integers(0, 4, size=count)


@dataclass
class LinkRealization:
    tx_classes: np.ndarray
    rx_symbols: np.ndarray
    alignment: int = 0
    electrical: dsp.SampleBuffer | None = field(default=None, repr=False)


def _photocurrent(amplitudes, cfg):
    taps = dsp.design_rrc(cfg.beta, cfg.sps, cfg.span_symbols)
    shaped = dsp.apply_fir(dsp.upsample(amplitudes, cfg.sps), taps)
    field = dsp.SampleBuffer(shaped.data + cfg.bias, cfg.sps, dsp.FIELD)
    field = dsp.apply_chromatic_dispersion(field, cfg.dispersion())
    return dsp.square_law_detect(field)


_REFERENCE_SYMBOLS = 1 << 14


@functools.lru_cache(maxsize=64)
def signal_power(cfg):
    """AC power of the noiseless photocurrent, measured on a fixed pilot."""
    rng = np.random.default_rng(0x5EED)
    pilot = random_classes(_REFERENCE_SYMBOLS, rng)
    current = _photocurrent(cfg.amplitudes[pilot], cfg).data
    return float(np.var(current))


def _guard_symbols(cfg):
    return cfg.span_symbols + 2 * cfg.n_tap


def _waveform(amplitudes, cfg, sigma2_db, rng):
    """Run the transmit/fiber/receive chain and return the DC-blocked photocurrent.

    The symbol sequence is extended cyclically by a guard on both sides and
    the guard is cut off again after the receiver, so the returned buffer has
    no filter or dispersion edge transients.
    """
    n = len(amplitudes)
    guard = _guard_symbols(cfg)
    extended = np.pad(np.asarray(amplitudes, dtype=float), guard, mode="wrap")
    current = _photocurrent(extended, cfg)
    current = dsp.SampleBuffer(current.data / np.sqrt(signal_power(cfg)), cfg.sps)
    current = dsp.add_awgn(current, sigma2_db, rng)
    if cfg.rx_filter == "rrc":
        current = dsp.apply_fir(current, dsp.design_rrc(cfg.beta, cfg.sps, cfg.span_symbols))
    core = current.data[guard * cfg.sps : (guard + n) * cfg.sps]
    return dsp.dc_block(dsp.SampleBuffer(core, cfg.sps))


# Both FIR stages are delay-compensated and the fiber response is zero-phase
# at DC, so symbol k sits at sample k * sps.
_ANALYTIC_PHASE = 0


def simulate_link(classes, cfg, sigma2_db, rng):
    """Send PAM4 classes through the link and sample the receiver at symbol rate.

    Parameters
    ----------
    classes : array_like of int
        Transmit classes 0..3 in ascending amplitude order.
    cfg : ChannelConfig
    sigma2_db : float or None
        Electrical noise variance in dB; ``None`` disables the noise.
    rng : numpy.random.Generator

    Returns
    -------
    LinkRealization
        ``rx_symbols[k]`` is the received sample belonging to ``classes[k]``.
    """
    classes = np.asarray(classes)
    if classes.size == 0:
        raise ValueError("need at least one transmit symbol")
    current = _waveform(cfg.amplitudes[classes], cfg, sigma2_db, rng)
    rx = dsp.downsample(current, _ANALYTIC_PHASE)
    return LinkRealization(classes, rx, alignment=0, electrical=current)


def pilot_alignment(tx_amplitudes, rx, max_lag=8):
    """Lag (in symbols) maximizing the tx/rx cross-correlation.

    Cross-check for the analytic alignment: for a correctly aligned link the
    result is 0.
    """
    a = np.asarray(tx_amplitudes, dtype=float)
    a = a - a.mean()
    r = np.asarray(rx, dtype=float)
    lags = np.arange(-max_lag, max_lag + 1)
    scores = []
    for lag in lags:
        if lag >= 0:
            scores.append(np.dot(a[: len(a) - lag], r[lag:]))
        else:
            scores.append(np.dot(a[-lag:], r[: len(r) + lag]))
    return int(lags[np.argmax(np.abs(scores))])


def symbol_response(cfg):
    """Symbol-rate response of the noiseless link to one isolated pulse.

    A mid-amplitude pulse is sent on a background of zeros and the response
    to the background alone is subtracted. The receiver uses a matched RRC so
    that a dispersion-free link has a single tap.
    """
    cfg = replace(cfg, rx_filter="rrc")
    span = 8 * cfg.span_symbols + 4 * cfg.n_tap
    center = span // 2
    amps = np.zeros(span)
    amps[center] = cfg.amplitudes[2]
    with_pulse = dsp.downsample(_waveform(amps, cfg, None, None), _ANALYTIC_PHASE)
    background = dsp.downsample(_waveform(np.zeros(span), cfg, None, None), _ANALYTIC_PHASE)
    return with_pulse - background, center


def estimate_effective_taps(cfg, energy_fraction=0.99):
    """Smallest odd symbol window around the peak holding ``energy_fraction`` of the pulse energy."""
    if not 0 < energy_fraction < 1:
        raise ValueError("energy_fraction must lie in (0, 1)")
    resp, _ = symbol_response(cfg)
    energy = resp**2
    total = energy.sum()
    peak = int(np.argmax(energy))
    half = 0
    while energy[max(peak - half, 0) : peak + half + 1].sum() < energy_fraction * total:
        half += 1
    return 2 * half + 1
