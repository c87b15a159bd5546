"""Offline developer harnesses for stgraphrl."""
