"""Signal-processing primitives for the IM/DD link.

Everything here is a pure function of its arguments. Random draws go through
an explicit :class:`numpy.random.Generator`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

SPEED_OF_LIGHT = 299_792_458.0  # m/s
PS_PER_NM_KM = 1e-6  # 1 ps/(nm km) in s/m^2

FIELD = "field"
ELECTRICAL = "electrical"


@dataclass(frozen=True)
class SampleBuffer:
    """Oversampled waveform with its samples-per-symbol tag.

    ``role`` is ``"field"`` for the (possibly complex) optical field and
    ``"electrical"`` for the real photocurrent.
    """

    data: np.ndarray
    sps: int = 1
    role: str = ELECTRICAL

    def __post_init__(self):
        if self.sps < 1:
            raise ValueError(f"sps must be >= 1, got {self.sps}")
        if self.role not in (FIELD, ELECTRICAL):
            raise ValueError(f"unknown buffer role {self.role!r}")
        data = np.asarray(self.data)
        if data.ndim != 1:
            raise ValueError("SampleBuffer data must be one-dimensional")
        if self.role == ELECTRICAL and np.iscomplexobj(data):
            if np.any(data.imag != 0):
                raise ValueError("electrical buffers must be real")
            data = data.real
        object.__setattr__(self, "data", data)

    def __len__(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class FilterTaps:
    coefficients: np.ndarray
    sps: int
    span_symbols: int

    def __len__(self):
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class DispersionParams:
    """Fiber dispersion in SI units.

    Use :meth:`from_engineering` to build from ps/(nm km), nm and km.
    """

    D: float  # s/m^2
    wavelength: float  # m
    length: float  # m
    sample_rate: float  # Hz

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.length < 0:
            raise ValueError("fiber length must be non-negative")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @classmethod
    def from_engineering(cls, D_ps_nm_km, wavelength_nm, length_km, sample_rate):
        return cls(
            D=D_ps_nm_km * PS_PER_NM_KM,
            wavelength=wavelength_nm * 1e-9,
            length=length_km * 1e3,
            sample_rate=sample_rate,
        )

    @property
    def beta2(self):
        """Group-velocity dispersion in s^2/m."""
        return -self.D * self.wavelength**2 / (2 * np.pi * SPEED_OF_LIGHT)

    def phase(self, f):
        """Phase of the fiber transfer function at baseband frequency ``f`` (Hz)."""
        return 2 * np.pi**2 * self.beta2 * np.asarray(f, dtype=float) ** 2 * self.length


def _rrc_value(t, beta):
    """Root-raised-cosine pulse at ``t`` (in symbol periods), unnormalized."""
    t = np.asarray(t, dtype=float)
    h = np.empty_like(t)
    if beta == 0:
        return np.sinc(t)
    at_zero = np.isclose(t, 0.0, rtol=0, atol=1e-12)
    at_sing = np.isclose(np.abs(t), 1 / (4 * beta), rtol=0, atol=1e-12)
    regular = ~(at_zero | at_sing)
    tr = t[regular]
    h[regular] = (
        np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    ) / (np.pi * tr * (1 - (4 * beta * tr) ** 2))
    h[at_zero] = 1 - beta + 4 * beta / np.pi
    h[at_sing] = (beta / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    return h


def design_rrc(beta, sps=4, span_symbols=32):
    """Design a unit-energy root-raised-cosine FIR filter.

    Parameters
    ----------
    beta : float
        Roll-off factor in ``[0, 1]``.
    sps : int
        Samples per symbol, at least 2.
    span_symbols : int
        Filter span in symbols; even and at least 8.

    Returns
    -------
    FilterTaps
        ``span_symbols * sps + 1`` symmetric taps with ``sum(c**2) == 1``.
    """
    if not 0 <= beta <= 1:
        raise ValueError(f"roll-off must lie in [0, 1], got {beta}")
    if sps < 2:
        raise ValueError(f"sps must be >= 2, got {sps}")
    if span_symbols < 8 or span_symbols % 2:
        raise ValueError(f"span_symbols must be even and >= 8, got {span_symbols}")
    half = span_symbols * sps // 2
    t = np.arange(-half, half + 1) / sps
    h = _rrc_value(t, beta)
    # exact symmetry, independent of rounding in the closed form
    h = 0.5 * (h + h[::-1])
    h /= np.sqrt(np.sum(h**2))
    return FilterTaps(coefficients=h, sps=sps, span_symbols=span_symbols)


def apply_fir(x, h):
    """Linear convolution trimmed to the input length, group delay removed."""
    if len(x) == 0:
        raise ValueError("cannot filter an empty buffer")
    c = np.asarray(h.coefficients if isinstance(h, FilterTaps) else h)
    full = signal.oaconvolve(x.data, c, mode="full")
    delay = (len(c) - 1) // 2
    return SampleBuffer(full[delay : delay + len(x)], x.sps, x.role)


def upsample(symbols, sps):
    """Insert ``sps - 1`` zeros after every symbol."""
    symbols = np.asarray(symbols)
    if sps < 1:
        raise ValueError(f"sps must be >= 1, got {sps}")
    out = np.zeros(symbols.shape[0] * sps, dtype=symbols.dtype if symbols.size else float)
    out[::sps] = symbols
    return SampleBuffer(out, sps, ELECTRICAL if not np.iscomplexobj(out) else FIELD)


def downsample(x, phase=0):
    """Pick every ``x.sps``-th sample starting at ``phase``."""
    if not 0 <= phase < x.sps:
        raise ValueError(f"phase must lie in [0, {x.sps}), got {phase}")
    return x.data[phase :: x.sps]


def apply_chromatic_dispersion(x, p):
    """Propagate the optical field through a dispersive fiber.

    The fiber is modelled as the all-pass filter
    ``H(f) = exp(1j * 2 * pi**2 * beta2 * f**2 * L)`` applied in the frequency
    domain. The input is zero-padded to a power of two of at least twice its
    length so the filter acts as a linear, not cyclic, convolution.
    """
    data = np.asarray(x.data, dtype=complex)
    if p.length == 0 or p.D == 0:
        return SampleBuffer(data, x.sps, FIELD)
    n = len(data)
    nfft = 1 << int(np.ceil(np.log2(max(2 * n, 2))))
    f = np.fft.fftfreq(nfft, d=1 / p.sample_rate)
    H = np.exp(1j * p.phase(f))
    y = np.fft.ifft(np.fft.fft(data, nfft) * H)
    # zero group delay: sample i of the output lines up with sample i of the input
    return SampleBuffer(y[:n], x.sps, FIELD)


def square_law_detect(x):
    """Photodiode: instantaneous power of the field."""
    d = x.data
    return SampleBuffer(d.real**2 + d.imag**2 if np.iscomplexobj(d) else d**2, x.sps, ELECTRICAL)


def add_awgn(x, sigma2_db, rng):
    """Add white Gaussian noise of variance ``10**(sigma2_db / 10)``.

    ``sigma2_db=None`` or ``-inf`` disables the noise.
    """
    if np.iscomplexobj(x.data):
        raise ValueError("add_awgn expects a real electrical buffer")
    if sigma2_db is None or np.isneginf(sigma2_db):
        return SampleBuffer(x.data.copy(), x.sps, x.role)
    sigma = np.sqrt(10 ** (sigma2_db / 10))
    return SampleBuffer(x.data + sigma * rng.standard_normal(len(x)), x.sps, x.role)


def dc_block(x):
    """Remove the empirical mean of the whole buffer."""
    if len(x) == 0:
        raise ValueError("cannot DC-block an empty buffer")
    d = np.asarray(x.data, dtype=float)
    out = d - d.mean()
    # second pass removes the rounding residue of the first
    out -= out.mean()
    return SampleBuffer(out, x.sps, x.role)
