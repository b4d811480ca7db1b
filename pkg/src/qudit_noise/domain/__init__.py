"""Domain layer - Contains numerical services, value objects and ports."""
