"""Tests for steermetrics."""
