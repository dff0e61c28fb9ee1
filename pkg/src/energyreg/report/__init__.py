"""Plot data, inline-SVG rendering and the self-contained HTML report."""

from .html import INDEX_HTML, render_from_bundles, render_html, render_report
from .plots import (
    box_stats,
    distribution_compare_data,
    evolution_plot_data,
    qq_points,
    violin_outline,
)

__all__ = [
    "INDEX_HTML", "box_stats", "distribution_compare_data", "evolution_plot_data", "qq_points",
    "render_from_bundles", "render_html", "render_report", "violin_outline",
]
