"""Finite-volume solver for epidemic compartment models with nonlocal aggregation."""
