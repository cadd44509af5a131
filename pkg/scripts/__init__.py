"""Subcommand entry modules; each exposes get_parser() and run(cfg)."""
