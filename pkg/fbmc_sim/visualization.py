"""
Visualization
=============

Figures rebuilt from a run directory's CSVs:
1. Cost comparison SHC vs AHC per zone (generation and congestion management)
2. UAF forecast error per CNE (boxplots)
3. Exchange delta against FB renewable feed-in
4. Maximum line loading before and after congestion management
5. Interactive flow-based domains (plotly)
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import plotly.graph_objects as go  # noqa: E402

logger = logging.getLogger(__name__)

SETUP_COLORS = {"shc": "tab:blue", "ahc": "tab:orange"}


def plot_costs(results, path):
    """Stacked generation / CM cost bars per zone, SHC next to AHC."""
    zones = list(dict.fromkeys(results["zone"]))
    x = np.arange(len(zones))
    width = 0.38
    fig, ax = plt.subplots(figsize=(12, 6))
    for k, setup in enumerate(("shc", "ahc")):
        df = results[results["setup"] == setup].set_index("zone").reindex(zones)
        offset = (k - 0.5) * width
        ax.bar(x + offset, df["generation_cost"] / 1e6, width, color=SETUP_COLORS[setup],
               alpha=0.85, label=f"{setup.upper()} generation")
        ax.bar(x + offset, df["cm_cost"] / 1e6, width, bottom=df["generation_cost"] / 1e6,
               color=SETUP_COLORS[setup], alpha=0.4, hatch="//", label=f"{setup.upper()} CM")
    ax.set_xticks(x)
    ax.set_xticklabels(zones)
    ax.set_ylabel("Cost (MEUR)")
    ax.set_title("Generation and congestion-management cost per zone")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fuaf_deviation(deviation, path, n_cnes=25):
    """Boxplots of the UAF deviation for the CNEs with the widest spread."""
    spread = deviation.groupby("cne")["deviation"].agg(lambda s: s.quantile(0.95) - s.quantile(0.05))
    top = spread.sort_values(ascending=False).index[:n_cnes]
    data = [deviation.loc[deviation["cne"] == c, "deviation"] * 100 for c in top]
    fig, ax = plt.subplots(figsize=(14, 6))
    if data:
        ax.boxplot(data, showfliers=False)
        ax.set_xticks(range(1, len(top) + 1))
        ax.set_xticklabels(top, rotation=90)
    ax.axhline(0, color="red", linestyle="--", alpha=0.5)
    ax.set_ylabel("UAF deviation D-1 vs D-2 (% of fmax)")
    ax.set_title("UAF forecast error per CNE")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_exchange_delta(delta, path):
    fig, ax = plt.subplots(figsize=(9, 6))
    for load_class, marker in (("high", "o"), ("low", "^")):
        df = delta[delta["load_class"] == load_class]
        ax.scatter(df["fb_res"], df["exchange_delta"], alpha=0.6, marker=marker,
                   label=f"{load_class} FB load")
    ax.axhline(0, color="gray", linestyle="--", alpha=0.5)
    ax.set_xlabel("FB renewable feed-in (MW)")
    ax.set_ylabel("NTC exchange volume AHC - SHC (MW)")
    ax.set_title("Exchange delta vs renewable feed-in")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_max_flows(flows, path):
    fig, axes = plt.subplots(1, 2, figsize=(14, 6), sharey=True)
    for ax, stage in zip(axes, ("d1", "d0")):
        for setup, color in SETUP_COLORS.items():
            df = flows[flows["setup"] == setup]
            ax.scatter(range(len(df)), df[stage] * 100, s=12, alpha=0.7, color=color,
                       label=setup.upper())
        ax.axhline(100, color="red", linestyle="--", alpha=0.6)
        ax.set_xlabel("Line")
        ax.set_title("After market coupling" if stage == "d1" else "After congestion management")
        ax.legend()
    axes[0].set_ylabel("Max n-1 loading (% of fmax - frm)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_domains(domain_dir, path):
    """Interactive HTML with one closed polygon per setup and hour."""
    fig = go.Figure()
    for csv in sorted(Path(domain_dir).glob("*.csv")):
        df = pd.read_csv(csv)
        if df.empty:
            continue
        setup = csv.stem.split("_")[0]
        closed = pd.concat([df, df.iloc[:1]], ignore_index=True)
        fig.add_trace(go.Scatter(
            x=closed["ex_12"], y=closed["ex_13"], mode="lines", name=csv.stem,
            line=dict(color=SETUP_COLORS.get(setup, "gray"),
                      dash="solid" if setup == "shc" else "dash"),
            hovertemplate="EX 1->2: %{x:.0f} MW<br>EX 1->3: %{y:.0f} MW<extra>%{fullData.name}</extra>",
        ))
    fig.update_layout(
        title="Flow-based domains (VBZ net positions fixed)",
        xaxis_title="EX zone 1 -> 2 (MW)",
        yaxis_title="EX zone 1 -> 3 (MW)",
        width=900,
        height=800,
    )
    fig.write_html(str(path))


def plot_run(run_dir):
    """
    Write all figures of a study run next to its CSVs.

    Args:
        run_dir (str | Path): Directory written by ``write_report``.

    Returns:
        list: Paths of the created files.
    """
    run_dir = Path(run_dir)
    created = []

    def have(name):
        exists = (run_dir / name).exists()
        if not exists:
            logger.warning("Skipping plot, %s not found in %s", name, run_dir)
        return exists

    if have("fig_results.csv"):
        plot_costs(pd.read_csv(run_dir / "fig_results.csv"), run_dir / "fig_results.png")
        created.append(run_dir / "fig_results.png")
    if have("fig_fuaf_dev.csv"):
        plot_fuaf_deviation(pd.read_csv(run_dir / "fig_fuaf_dev.csv", dtype={"cne": str}),
                            run_dir / "fig_fuaf_dev.png")
        created.append(run_dir / "fig_fuaf_dev.png")
    if have("fig_exchange_delta.csv"):
        plot_exchange_delta(pd.read_csv(run_dir / "fig_exchange_delta.csv"),
                            run_dir / "fig_exchange_delta.png")
        created.append(run_dir / "fig_exchange_delta.png")
    if have("fig_max_flows.csv"):
        plot_max_flows(pd.read_csv(run_dir / "fig_max_flows.csv"), run_dir / "fig_max_flows.png")
        created.append(run_dir / "fig_max_flows.png")
    if (run_dir / "domains").is_dir():
        plot_domains(run_dir / "domains", run_dir / "domains.html")
        created.append(run_dir / "domains.html")

    print(f"Created {len(created)} figure(s) in {run_dir}")
    return created
