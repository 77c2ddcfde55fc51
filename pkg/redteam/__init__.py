"""Circuit-inversion attack run from a provider's point of view."""
