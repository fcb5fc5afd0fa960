"""Multi-horizon trend allocation: signals, minimum-variance horizon weights,
persistence-filtered reweighting, exposure decoding and walk-forward tests."""

__version__ = "0.1.0"
