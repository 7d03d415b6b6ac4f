"""Numerical engines for dissim."""
