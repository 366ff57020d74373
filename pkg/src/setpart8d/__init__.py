"""Nonlinearity-tolerant 8D formats from set-partitioned PDM-QPSK, plus a
coherent WDM link simulator to evaluate them."""

__version__ = "0.1.0"
