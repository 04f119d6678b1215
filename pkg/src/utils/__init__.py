"""Utility functions for report files and terminal output."""
