"""Alignment metrics over ordinal opinion distributions."""
