"""Run the command-line interface with `python -m fairdrop`."""

from .cli import console_entry

console_entry()
