"""Figure generation for mecsim experiment CSV logs."""
from .figures import FigureSpec, compute_series, moving_average, presets, render

__all__ = ["FigureSpec", "compute_series", "moving_average", "presets", "render"]
