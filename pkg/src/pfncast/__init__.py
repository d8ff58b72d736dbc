"""Zero-shot forecasting with a transformer fitted to a synthetic series prior."""

__version__ = "0.1.0"
