try:
    import matplotlib.pyplot as plt
    import seaborn as sns

    from .experiments import format_bytes, format_duration
except ImportError:
    raise ImportError("To use plotting functionality, install optional dependencies via retri-schedules[plot].")

plt.rcParams.update({"font.size": 7})


def plot_speedup_heatmap(speedups, reconfigs=None, title=None, cmap="RdYlGn", ax=None, markers=None):
    """Plot the speedup matrix of experiments.emit_heatmap.

    Parameters
    ----------
    speedups : pd.DataFrame
        rows message sizes (bytes), columns deltas (seconds)
    reconfigs : pd.DataFrame, optional
        R per cell, written under each speedup
    title : str, optional
    cmap : str
        diverging colormap, centered at a speedup of 1
    ax : matplotlib.axes.Axes, optional
    markers : pd.DataFrame, optional
        short tag per cell (e.g. the winning baseline), prefixed to the speedup

    Returns
    -------
    matplotlib.figure.Figure
    """
    if ax is None:
        fig, ax = plt.subplots(figsize=(1 + 0.9 * speedups.shape[1], 1 + 0.5 * speedups.shape[0]))
    else:
        fig = ax.figure

    annot = speedups.apply(lambda column: column.map("{:.2f}".format))
    if markers is not None:
        annot = markers.astype(str) + " " + annot
    if reconfigs is not None:
        annot = annot + reconfigs.astype(int).apply(lambda column: column.map("\nR={}".format))
    sns.heatmap(
        speedups,
        annot=annot.to_numpy(),
        fmt="",
        cmap=cmap,
        center=1.0,
        cbar_kws={"label": "speedup"},
        xticklabels=[format_duration(d) for d in speedups.columns],
        yticklabels=[format_bytes(int(m)) for m in speedups.index],
        ax=ax,
    )
    ax.tick_params(axis="x", labelrotation=45)
    ax.tick_params(axis="y", labelrotation=0)
    ax.set_ylabel("message size")
    ax.set_xlabel("reconfiguration delay")
    if title:
        ax.set_title(title)
    return fig


def save_speedup_heatmap(speedups, path, reconfigs=None, title=None):
    fig = plot_speedup_heatmap(speedups, reconfigs, title)
    fig.savefig(path, bbox_inches="tight", dpi=200)
    plt.close(fig)
    return path


def plot_comparison_heatmap(comparison, title=None, cmap="RdYlGn", ax=None):
    """Speedup over the stronger baseline per cell, tagged with that baseline.

    Parameters
    ----------
    comparison : experiments.BaselineComparison
    title : str, optional
    cmap : str
    ax : matplotlib.axes.Axes, optional

    Returns
    -------
    matplotlib.figure.Figure
    """
    tags = comparison.tags()
    markers = comparison.best.apply(lambda column: column.map(tags))
    fig = plot_speedup_heatmap(
        comparison.best_speedups(), comparison.reconfigs, title, cmap=cmap, ax=ax, markers=markers
    )
    legend = ", ".join(f"{tag} = {label}" for label, tag in tags.items())
    (ax or fig.axes[0]).set_xlabel(f"reconfiguration delay ({legend})")
    return fig


def save_comparison_heatmap(comparison, path, title=None):
    fig = plot_comparison_heatmap(comparison, title)
    fig.savefig(path, bbox_inches="tight", dpi=200)
    plt.close(fig)
    return path
