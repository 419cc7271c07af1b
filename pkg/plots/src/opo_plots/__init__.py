"""Rendering of coupled-OPO sweep CSVs into publication-style figures."""

__version__ = "0.1.0"

from .csvdata import CsvError, read_csv
from .render import PlotJob, render

__all__ = ["CsvError", "PlotJob", "read_csv", "render", "__version__"]
