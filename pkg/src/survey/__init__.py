"""Survey schema and microdata ingestion."""
