"""Prompt construction, provider queries and log-prob extraction."""
