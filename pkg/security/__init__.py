"""security - Security submodels and the SecMec metric."""
