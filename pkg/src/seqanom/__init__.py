"""Byte-sequence anomaly detection toolkit.

A sequence model (LSTM stack + MLP with a linear bottleneck) turns each
prefix of a byte sequence into a fixed-size context vector; an array of
per-symbol one-class SVMs learns the region of context space from which
each symbol is normally predicted. A sequence is anomalous when some
position's context falls outside the region for the symbol that actually
occurred. Baseline detectors (next-symbol probability threshold, n-gram
window membership), synthetic IPv4/JSON corpus generators, and a CLI
harness for the full generate/train/calibrate/evaluate/report pipeline
round out the package.
"""

__version__ = "0.1.0"

from .numeric import Matrix, RngStream
from .seqnn import ALPHABET_SIZE, DELIMITER, NetConfig, SequenceNet, frame
from .ocsvm import KernelParams, OcsvmModel
from .detector import OcsvmArray, Verdict

__all__ = [
    "ALPHABET_SIZE",
    "DELIMITER",
    "KernelParams",
    "Matrix",
    "NetConfig",
    "OcsvmArray",
    "OcsvmModel",
    "RngStream",
    "SequenceNet",
    "Verdict",
    "frame",
    "__version__",
]
