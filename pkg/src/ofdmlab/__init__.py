"""ofdmlab: desk-scale OFDM link-level laboratory.

TX/RX chain with TDL fading channels, a conventional LS/LMMSE receiver, a
fully convolutional neural receiver, and a BER-vs-SINR evaluation harness
with capture/replay dataset files.
"""

from .dsp import ComplexBuffer, seeded_rng
from .frame import Numerology, PilotReference, ResourceGrid
from .channel import ChannelScenario, get_profile, load_profiles

__version__ = "0.1.0"

__all__ = [
    "ComplexBuffer",
    "seeded_rng",
    "Numerology",
    "PilotReference",
    "ResourceGrid",
    "ChannelScenario",
    "get_profile",
    "load_profiles",
    "__version__",
]
