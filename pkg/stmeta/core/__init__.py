"""Core configuration, errors and run configuration."""
