"""
Utility modules for switchrad.

This package contains the exception hierarchy and the solver
configuration.
"""
