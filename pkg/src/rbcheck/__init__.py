"""Parameterized model checking of rendezvous/broadcast networks."""

__version__ = "0.1.0"
