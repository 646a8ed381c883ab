"""Hybrid quantum LSTM on an exact statevector simulator, with a classical
LSTM baseline, quantum PCA, and a reproducible benchmark harness."""

__version__ = "0.1.0"
