"""Test suite for the opinion alignment toolkit."""
