"""data - Dataset ingestion (IDX files and synthetic blobs)."""
