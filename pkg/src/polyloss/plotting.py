"""Figure rendering for CLI reports.

Each function writes one PNG next to the CSV it illustrates.  The effective
configuration is stored in the PNG metadata so figures stay traceable.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}


def _save(fig, path, config: dict | None) -> None:
    meta = {"Software": "polyloss"}
    if config is not None:
        meta["Description"] = json.dumps(config, sort_keys=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=meta)
    plt.close(fig)


def plot_loss_curve(rows: list[dict], path, label: str, config: dict | None = None) -> None:
    """Loss and its derivative against pt."""
    pts = [r["pt"] for r in rows]
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
        ax0.plot(pts, [r["loss"] for r in rows], color="C3", label=label)
        ax0.set_xlabel("pt")
        ax0.set_ylabel("loss")
        ax0.legend()
        ax1.plot(pts, [r["dloss_dpt"] for r in rows], color="C0")
        ax1.set_xlabel("pt")
        ax1.set_ylabel("dL/dpt")
        ax1.set_yscale("symlog")
        _save(fig, path, config)


def plot_coefficients(rows: list[dict], path, label: str, config: dict | None = None) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot([r["j"] for r in rows], [r["alpha_j"] for r in rows], "o-", ms=3, label=label)
        ax.set_xlabel("power j of (1 - pt)")
        ax.set_ylabel("coefficient")
        ax.legend()
        _save(fig, path, config)


def plot_residuals(reports, path, config: dict | None = None) -> None:
    """|R_N| and |R_N'| bounds per (zeta, delta) case, with the target zeta."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [f"z={r.zeta:g}, d={r.delta:g}\nN={r.n}" for r in reports]
        xs = range(len(reports))
        ax.bar([x - 0.2 for x in xs], [r.max_abs_residual for r in reports], 0.4, label="max |R_N|")
        ax.bar([x + 0.2 for x in xs], [r.max_abs_residual_derivative for r in reports], 0.4,
               label="max |R_N'|")
        ax.scatter(list(xs), [r.zeta for r in reports], marker="_", s=400, color="k", label="zeta")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels)
        ax.set_yscale("log")
        ax.legend()
        _save(fig, path, config)


def plot_run(record: dict, path, config: dict | None = None) -> None:
    """Mean pt over training, overall and per class."""
    steps = [e["step"] for e in record["per_eval"]]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(steps, [e["mean_pt_overall"] for e in record["per_eval"]], color="k", lw=2,
                label="overall")
        n_classes = len(record["per_eval"][0]["mean_pt_per_class"])
        if n_classes <= 10:
            for c in range(n_classes):
                ax.plot(steps, [e["mean_pt_per_class"][c] for e in record["per_eval"]], lw=1,
                        alpha=0.7, label=f"class {c}")
        ax.axhline(0.5, color="C3", ls="--", lw=1)
        ax.set_xlabel("step")
        ax.set_ylabel("mean pt")
        ax.set_ylim(0, 1)
        ax.legend(ncol=2, fontsize=7)
        _save(fig, path, config)


def plot_sweep(parameter: str, values: list, records: list[dict], path,
               config: dict | None = None) -> None:
    """Final accuracy and mean pt per swept value, plus the mean pt trajectories."""
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
        xs = list(range(len(values)))
        ax0.plot(xs, [r["final"]["train_accuracy"] for r in records], "o-", label="accuracy")
        ax0.plot(xs, [r["final"]["mean_pt_overall"] for r in records], "s-", label="mean pt")
        ax0.set_xticks(xs)
        ax0.set_xticklabels([str(v) for v in values])
        ax0.set_xlabel(parameter)
        ax0.legend()
        cmap = plt.get_cmap("viridis")
        for i, (v, r) in enumerate(zip(values, records)):
            steps = [e["step"] for e in r["per_eval"]]
            ax1.plot(steps, [e["mean_pt_overall"] for e in r["per_eval"]],
                     color=cmap(i / max(len(values) - 1, 1)), label=f"{parameter}={v}")
        ax1.set_xlabel("step")
        ax1.set_ylabel("mean pt")
        ax1.legend(fontsize=7)
        _save(fig, path, config)
