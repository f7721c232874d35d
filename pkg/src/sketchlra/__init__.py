"""Randomized low-rank approximation with structured sparse multipliers."""
