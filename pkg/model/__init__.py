"""model - Backbone graphs, model materialization, inference and training."""
