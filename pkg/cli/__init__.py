"""Command-line suite and report figures."""
