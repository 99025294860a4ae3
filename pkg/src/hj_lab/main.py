"""
Compatibility module exposing the command line application.
"""
from hj_lab.adapters.cli.main import app

__all__ = ["app"]
