"""
Static SVG figures: node-drop scatter, dissemination curves and latency
histograms with a fitted beta overlay.

Figures are drawn with matplotlib's object-oriented API (no pyplot state) and
serialized as SVG 1.1 with a fixed hash salt and no timestamp, so the same
data always produces the same document.
"""

import io
import logging
from typing import List, Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from config import CURVE_COLORS, FIGURE_DPI, FIGURE_SIZE_IN, SVG_HASH_SALT
from src.export import PathLike, write_text
from src.gossip import GossipTrace
from src.spatial import NetworkSnapshot, Role
from src.stats import BetaFit, Histogram, beta_pdf

logger = logging.getLogger(__name__)

_OVERLAY_POINTS = 200


class FigureWriter:
    """Renders simulator results as SVG documents."""

    def __init__(
        self,
        size_in=FIGURE_SIZE_IN,
        dpi: int = FIGURE_DPI,
        colors: Optional[List[str]] = None
    ):
        self.size_in = size_in
        self.dpi = dpi
        self.colors = colors or CURVE_COLORS

    def _new_axes(self):
        figure = Figure(figsize=self.size_in, dpi=self.dpi)
        return figure, figure.add_subplot(1, 1, 1)

    def _to_svg(self, figure: Figure) -> str:
        buffer = io.BytesIO()
        with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
            figure.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue().decode("utf-8")

    def scatter_svg(self, snapshot: NetworkSnapshot, title: str = "") -> str:
        """Legitimate nodes as black squares, faulty nodes as green circles."""
        figure, axes = self._new_axes()
        for role, marker, color, label in (
            (Role.LEGITIMATE, "s", "black", "legitimate"),
            (Role.FAULTY, "o", "green", "faulty"),
        ):
            xs = [node.x_m for node in snapshot.nodes if node.role is role]
            ys = [node.y_m for node in snapshot.nodes if node.role is role]
            axes.scatter(xs, ys, marker=marker, s=18, c=color, label=f"{label} ({len(xs)})")

        side = snapshot.region.side_m
        axes.set_xlim(0.0, side)
        axes.set_ylim(0.0, side)
        axes.set_aspect("equal")
        axes.set_xlabel("x (m)")
        axes.set_ylabel("y (m)")
        axes.legend(loc="upper right")
        if title:
            axes.set_title(title)
        return self._to_svg(figure)

    def curves_svg(
        self,
        traces: Sequence[GossipTrace],
        n_values: Sequence[int],
        title: str = ""
    ) -> str:
        """Informed fraction r_t against slot, one line per network size."""
        figure, axes = self._new_axes()
        for index, (trace, n) in enumerate(zip(traces, n_values)):
            color = self.colors[index % len(self.colors)]
            axes.plot(range(len(trace.informed)), trace.informed, marker="o", color=color, label=f"N = {n}")

        axes.set_xlabel("time slot t")
        axes.set_ylabel("informed fraction r_t")
        axes.set_ylim(0.0, 1.05)
        if traces:
            axes.legend(loc="lower right")
        if title:
            axes.set_title(title)
        return self._to_svg(figure)

    def histogram_svg(
        self,
        histogram: Histogram,
        fit: Optional[BetaFit] = None,
        title: str = ""
    ) -> str:
        """
        Latency histogram as a density, with the fitted beta PDF mapped back
        onto the latency axis when a fit is given.
        """
        figure, axes = self._new_axes()
        edges = np.asarray(histogram.bin_edges, dtype=float)
        widths = np.diff(edges)
        counts = np.asarray(histogram.counts, dtype=float)
        density = counts / (histogram.total * widths) if histogram.total else counts
        axes.bar(edges[:-1], density, width=widths, align="edge",
                 color="#9ecae1", edgecolor="#3182bd", label="latency samples")

        if fit is not None:
            span = fit.upper - fit.lower
            xs = np.linspace(fit.lower, fit.upper, _OVERLAY_POINTS)[1:-1]
            ys = beta_pdf((xs - fit.lower) / span, fit.alpha, fit.beta) / span
            axes.plot(xs, ys, color="#d62728",
                      label=f"beta fit (alpha={fit.alpha:.3g}, beta={fit.beta:.3g})")

        axes.set_xlabel("consensus latency (slots)")
        axes.set_ylabel("density")
        axes.legend(loc="upper right")
        if title:
            axes.set_title(title)
        return self._to_svg(figure)

    def write(self, svg: str, path: PathLike):
        return write_text(svg, path)


def create_figure_writer() -> FigureWriter:
    """Factory function to create a figure writer."""
    return FigureWriter()
