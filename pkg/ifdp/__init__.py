"""Solvers for the integer flow with deadline problem."""
