"""qsim - Small exact and noisy quantum circuit simulator."""
