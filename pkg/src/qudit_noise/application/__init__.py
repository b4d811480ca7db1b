"""Application layer: run configuration, commands and pipeline orchestration."""
