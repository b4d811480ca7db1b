"""Infrastructure layer - Contains adapters, codecs and configuration."""
