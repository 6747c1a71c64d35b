"""
Test suite for switchrad.

This package contains unit tests, acceptance-scale tests and test fixtures
for the radius computations and the command-line front end.
"""
