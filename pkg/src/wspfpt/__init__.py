"""Fixed-parameter solver for workflow satisfiability with =, != and < constraints."""

__version__ = "0.1.0"
