"""Spatial-temporal trajectory graph representation learning."""
