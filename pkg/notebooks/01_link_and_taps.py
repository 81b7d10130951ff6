# %% [markdown]
"""
The IM/DD link
==============

A PAM4 stream is pulse shaped, biased, dispersed in the fiber and detected
by a square-law photodiode. Dispersion acting on the field followed by
``|.|**2`` turns into nonlinear intersymbol interference on the received
samples. This script looks at the received levels and at how far the
interference reaches for both channel presets.
"""

# %%
import numpy as np

from imdd_snn import link

A = link.preset_channel("A")
B = link.preset_channel("B")
for ch in (A, B):
    print(ch.name, f"{ch.baud / 1e9:.0f} GBd", f"{ch.wavelength * 1e9:.0f} nm",
          f"D={ch.D} ps/nm/km", f"L={ch.length_km} km", "levels", ch.constellation)

# %% [markdown]
"""
Received levels per transmitted class. Without dispersion and with a
matched receive filter the four clusters are separated; at 5 km they smear
into each other.
"""

# %%
rng = np.random.default_rng(0)
cls = link.random_classes(20_000, rng)
for L in (0.0, 5.0):
    ch = link.preset_channel("A", length_km=L, rx_filter="rrc")
    rx = link.simulate_link(cls, ch, None, None).rx_symbols
    spans = [f"[{rx[cls == c].min():+.2f}, {rx[cls == c].max():+.2f}]" for c in range(4)]
    print(f"channel A, {L:.0f} km:", "  ".join(spans))

# %% [markdown]
"""
Noise is specified as a variance in dB relative to the received signal
power, so -20 dB adds noise of variance 0.01 to unit-power samples.
"""

# %%
clean = link.simulate_link(cls, A, None, None).rx_symbols
noisy = link.simulate_link(cls, A, -20.0, np.random.default_rng(1)).rx_symbols
print("signal var", np.var(clean).round(3), "noise var", np.var(noisy - clean).round(4))

# %% [markdown]
"""
Effective taps: width of the symbol window around the peak of the end to end
pulse response that holds 99 % of its energy. It grows with the fiber
length on channel B. On channel A the estimate stays well below the 17 taps
the equalizers are configured with, which leaves them some margin.
"""

# %%
print("channel A:", link.estimate_effective_taps(A))
for L in range(0, 7):
    print(f"channel B {L} km:", link.estimate_effective_taps(B.with_length(L)))
