"""networking - Provider daemons, the NDJSON job protocol and the node dispatcher."""
