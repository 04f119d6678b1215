"""Core components: configuration, exceptions and run orchestration."""
