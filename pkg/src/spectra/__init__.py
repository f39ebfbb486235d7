"""Spectral tools for half-plane magnetic Schrodinger operators."""
