"""server - Provider daemons: one foreground daemon or a local fleet."""
