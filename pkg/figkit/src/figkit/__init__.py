"""figkit: thin figure rendering for zenogas CSV artifacts."""

__version__ = "0.1.0"

from .plots import render, fit_exponent
from .schema import load_table, SchemaError

__all__ = ["render", "fit_exponent", "load_table", "SchemaError"]
