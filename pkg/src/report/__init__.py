"""Report tables and manifest emission."""
