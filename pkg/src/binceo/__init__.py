"""Successive Wyner-Ziv coding for the L-link binary CEO problem under log-loss.

Exact bounds and optimal test-channel allocation, plus an LDGM/LDPC
encoder-decoder chain whose empirical rate-distortion performance is
measured against those bounds.
"""

__version__ = "0.1.0"

from .model import CeoModel, RatePoint

__all__ = ["CeoModel", "RatePoint", "__version__"]
