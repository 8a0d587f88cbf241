"""Multi-antenna broadcast channels with finite-rate direction feedback."""
__version__ = "0.1.0"
