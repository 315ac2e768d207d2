"""Figure rendering for infectree CLI output files.

This package never computes model quantities itself: every number it draws
comes from a CSV produced by the `infectree` command line tool, together
with the sidecar JSON written next to it.
"""

from .jobs import FigureError, FigureJob
from .render import (render_fluid, render_height, render_kappa_curve,
                     render_profile, render_tree)

__version__ = "0.1.0"

__all__ = [
    "FigureError",
    "FigureJob",
    "render_kappa_curve",
    "render_tree",
    "render_profile",
    "render_fluid",
    "render_height",
]
