"""Pairwise surface registration via landmark matching."""
