"""Integration tests - subcommands run end to end through the command line."""
