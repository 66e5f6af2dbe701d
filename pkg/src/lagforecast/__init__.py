"""Lag-order selection for LSTM forecasting of seasonal monthly series via
Bayesian optimization, with classical baselines and rank-based model
comparison."""

__version__ = "0.1.0"
