"""Street-scene multi-actor dynamics generation."""
