"""Render experiment figures from cachenet result tables."""

from .render import FIGURES, RenderedFigure, render_figures

__all__ = ["FIGURES", "RenderedFigure", "render_figures"]
