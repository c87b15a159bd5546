"""Training and evaluation orchestration."""
