"""Linear regression by SGD, Kalman-consolidated weights, and minimum-AUC model selection."""

__version__ = "0.1.0"
