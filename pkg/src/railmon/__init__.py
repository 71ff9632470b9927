"""railmon: desk-scale structure-borne-noise monitoring pipeline for rail.

Synthetic vehicle and track sensors feed an FFT compression stage, a
hash-chained versioned ledger, a human labeling workflow, and a spectral
feature pipeline that publishes maintenance recommendations through an
HTTP gateway.
"""

__version__ = "0.1.0"
