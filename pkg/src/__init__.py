"""
switchrad

Stabilizability radius of discrete-time switched linear systems with
singular matrices: exact radii for singular-plus-rotation pairs and
exhaustive product searches for general matrix sets.
"""

__version__ = "1.0.0"
