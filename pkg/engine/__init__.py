"""engine - Controller, design-space environment and the searches."""
