"""Subcommands of the ``hemo`` command line."""
