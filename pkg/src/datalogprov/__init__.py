"""Why and why-not provenance for non-recursive Datalog with negation."""
__version__ = "0.1.0"
