"""Simulation of short-reach IM/DD optical links and their equalizers.

Submodules
----------
dsp
    Pulse shaping, fiber dispersion, detection and noise.
link
    Channel presets and the end-to-end transmit/receive chain.
neural
    Spiking and conventional network layers, encoders, gradients and Adam.
equalizers
    Linear, decision-feedback and neural equalizers with a streaming loop.
training
    Batch generation, training loop and checkpoints.
evaluation
    Monte-Carlo BER measurement, sweeps and published reference values.
cli
    Command-line entry point (``python -m imdd_snn``).
"""
from . import dsp, equalizers, evaluation, link, neural, training
from .equalizers import Equalizer, equalize_stream
from .link import ChannelConfig, preset_channel, simulate_link

__all__ = [
    "ChannelConfig",
    "Equalizer",
    "dsp",
    "equalize_stream",
    "equalizers",
    "evaluation",
    "link",
    "neural",
    "preset_channel",
    "simulate_link",
    "training",
]
__version__ = "0.1.0"
