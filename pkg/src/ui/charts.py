import matplotlib
matplotlib.use("Agg")
from matplotlib.figure import Figure

from utils.file_io import write_atomic

BACKGROUND = "#131722"
PANEL = "#1E222D"
LEGEND = "#2A2E39"
GRID = "#363A45"
MUTED = "#787B86"
TEXT = "#D1D4DC"
SERIES_COLORS = ("#2962FF", "#26A69A", "#EF5350", "#FFA726", "#42A5F5")


def _style_axes(ax, title=None, ylabel=None):
    if title:
        ax.set_title(title, fontsize=12, fontweight="bold", color=TEXT, pad=12)
    if ylabel:
        ax.set_ylabel(ylabel, fontsize=10, color=MUTED)
    ax.grid(True, alpha=0.1, linestyle="-", linewidth=0.5, color=GRID)
    for spine in ax.spines.values():
        spine.set_color(GRID)
        spine.set_linewidth(0.5)
    ax.tick_params(colors=MUTED, which="both", labelsize=8)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", framealpha=0.9, facecolor=LEGEND, edgecolor=GRID, labelcolor=TEXT, fontsize=8)


def _save(figure, path):
    figure.tight_layout(pad=1.0)
    write_atomic(path, lambda tmp: figure.savefig(tmp, format="png", facecolor=BACKGROUND, dpi=110))
    return path


def plot_signal_comparison(labels, series, title, path, ylabel="Respondents"):
    """
    Before/after line chart of one or more signals over the parameter values.

    Args:
        labels: parameter values (x axis)
        series: mapping of legend name -> vector
        title: chart title
        path: PNG destination
    """
    figure = Figure(figsize=(10, 5), facecolor=BACKGROUND)
    ax = figure.add_subplot(111, facecolor=PANEL)
    positions = range(len(labels))
    for (name, values), color in zip(series.items(), SERIES_COLORS * 4):
        ax.plot(positions, values, linewidth=2, marker="o", markersize=3, color=color, label=name)
    ax.set_xticks(list(positions))
    ax.set_xticklabels([str(label) for label in labels], rotation=60)
    ax.set_xlabel("Parameter value", fontsize=10, color=MUTED)
    _style_axes(ax, title, ylabel)
    return _save(figure, path)


def plot_decomposition(labels, signal, rows, title, path):
    """Signal with its approximation on top, one panel per detail below."""
    figure = Figure(figsize=(10, 2.2 * (len(rows) + 1)), facecolor=BACKGROUND)
    positions = list(range(len(labels)))

    top = figure.add_subplot(len(rows), 1, 1, facecolor=PANEL)
    top.plot(positions, signal, linewidth=2, color=SERIES_COLORS[0], label="signal")
    approx_name, approx = rows[0]
    top.plot(positions, approx, linewidth=1.5, linestyle="--", color=SERIES_COLORS[3], label=approx_name)
    _style_axes(top, title)

    for panel, (name, detail) in enumerate(rows[1:], start=2):
        ax = figure.add_subplot(len(rows), 1, panel, facecolor=PANEL)
        ax.bar(positions, detail, color=SERIES_COLORS[1], alpha=0.8, label=name)
        ax.axhline(0.0, color=GRID, linewidth=0.8)
        _style_axes(ax)

    for ax in figure.axes:
        ax.set_xticks(positions)
        ax.set_xticklabels([str(label) for label in labels], rotation=60, fontsize=7)
    return _save(figure, path)
