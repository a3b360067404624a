"""Multiband spectrum sensing simulation library.

Modules: scenario (signal/ground-truth generation), sbdetect
(single-band detectors and calibration), mbdetect (multiband sensing
strategies), widebandest (wavelet edge detection and compressive
sensing), coop (cooperative fusion and band assignment), perf (metrics,
throughput, tradeoff optimizers), cli (experiment runner).
"""

__version__ = "0.1.0"

from .scenario import H0, H1, UNDECIDED  # noqa: F401
