"""Serve an arbitrary batch predictor over the wstress v1 line protocol.

The bridge is a pure predictor shim: it never sees constraint or projection
machinery, only rows in and one real per row out, so anything exposing a
batch predict call can be stressed as a black box.
"""

from .server import load_predictor, serve

__version__ = "0.1.0"
