"""Drive log fixtures for steermetrics tests."""
