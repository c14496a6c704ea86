"""Extreme-move signal toolkit for BTC.

Subpackages cover the full pipeline: candle/asset ingestion, technical
indicators, feature normalization and labeling, a from-scratch kernel SVM,
a small CNN engine over per-day embedding stacks, probability fusion with
threshold sweeps, and a long-only backtester with baseline strategies.
"""

__version__ = "0.1.0"
