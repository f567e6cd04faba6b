"""Figure rendering for monna experiment CSVs."""

from .render import FigureError, FigureSpec, MissingColumnError, NoInputError, parse_spec, render

__all__ = [
    "FigureError",
    "FigureSpec",
    "MissingColumnError",
    "NoInputError",
    "parse_spec",
    "render",
]
