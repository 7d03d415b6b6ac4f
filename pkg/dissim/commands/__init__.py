"""Subcommands for the dissim CLI."""
from .gca import gca
from .resources import resources
from .simulate import simulate
from .verify import verify
