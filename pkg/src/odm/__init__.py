"""Morphology-aware causal transformer policies for multi-joint chains."""

__version__ = "0.1.0"
