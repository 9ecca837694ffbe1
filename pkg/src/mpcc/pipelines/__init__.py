"""End-to-end smart-meter and image runs, metrics and artifact writers."""
