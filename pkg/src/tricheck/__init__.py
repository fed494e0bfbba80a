"""Cross-task consistency engine for selecting or abstaining over sampled programs."""

__version__ = "0.1.0"
