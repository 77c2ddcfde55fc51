"""
report.py - Figures and the comparison table, read back from run outputs.

Nothing is recomputed: every number comes from episodes.csv and the
best_*.json files a search wrote, plus an optional security report for
the naive design.

Run layout under the output root:

    engine/      run_search
    random/      run_random_search
    nas-<qcp>/   run_single_provider_nas, one per provider
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from settings import (  # noqa: E402
    ACC_SECACC_SVG, BEST_ACC_JSON, BEST_SEC_JSON, EPISODES_CSV, PARETO_SVG, SUMMARY_CSV,
)
from utils.helpers import clamp  # noqa: E402

log = logging.getLogger("splitq.cli")

plt.rcParams["svg.hashsalt"] = "splitq"

SUMMARY_COLUMNS = ["method", "pick", "acc", "sec_acc", "sec_mec", "n_providers", "n_nodes",
                   "acc_vs_baseline", "sec_vs_baseline"]

_COLORS = {"engine": "tab:red", "random": "tab:blue"}


@dataclass
class RunData:
    name: str
    episodes: pd.DataFrame
    best_acc: dict
    best_sec: dict

    @property
    def is_nas(self) -> bool:
        return self.name.startswith("nas-")


def _metrics(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return data.get("metrics", data)


def load_run(run_dir: str, name: str | None = None) -> RunData:
    """One search output directory."""
    return RunData(name or os.path.basename(os.path.normpath(run_dir)),
                   pd.read_csv(os.path.join(run_dir, EPISODES_CSV)),
                   _metrics(os.path.join(run_dir, BEST_ACC_JSON)),
                   _metrics(os.path.join(run_dir, BEST_SEC_JSON)))


def find_runs(root: str) -> dict[str, RunData]:
    """Every subdirectory of `root` holding a complete search output."""
    runs = {}
    if not os.path.isdir(root):
        return runs
    for name in sorted(os.listdir(root)):
        path = os.path.join(root, name)
        needed = (EPISODES_CSV, BEST_ACC_JSON, BEST_SEC_JSON)
        if os.path.isdir(path) and all(os.path.exists(os.path.join(path, f)) for f in needed):
            runs[name] = load_run(path, name)
    return runs


def _front(df: pd.DataFrame) -> pd.DataFrame:
    """Non-dominated (acc, sec_mec) rows, sorted by accuracy."""
    ordered = df.sort_values(["acc", "sec_mec"], ascending=False)
    best_so_far = ordered["sec_mec"].cummax().shift(fill_value=-np.inf)
    return ordered[ordered["sec_mec"] > best_so_far].sort_values("acc")


# ──────────────────────────────────────────────
# Summary table
# ──────────────────────────────────────────────
def _row(method: str, pick: str, m: dict) -> dict:
    return {"method": method, "pick": pick, "acc": float(m["acc"]),
            "sec_acc": float(m.get("sec_acc", 0.0)), "sec_mec": float(m["sec_mec"]),
            "n_providers": int(m.get("n_providers", 0)), "n_nodes": int(m.get("n_nodes", 0))}


def summary_table(runs: dict[str, RunData], naive: dict | None = None) -> pd.DataFrame:
    """
    Method comparison with deltas against the two baselines.

    Accuracy baseline: best NAS-single accuracy over all providers.
    Security baseline: SecMec of the random search's most secure design.
    """
    rows = []
    for name, run in runs.items():
        if run.is_nas:
            rows.append(_row(f"NAS-single {name[4:]}", "acc", run.best_acc))
    for name in ("random", "engine"):
        if name in runs:
            rows.append(_row(name, "acc", runs[name].best_acc))
            rows.append(_row(name, "sec", runs[name].best_sec))
    if naive is not None:
        rows.append(_row("naive5", "-", naive))

    df = pd.DataFrame(rows, columns=SUMMARY_COLUMNS[:-2])
    nas_acc = [r.best_acc["acc"] for r in runs.values() if r.is_nas]
    acc_base = max(nas_acc) if nas_acc else np.nan
    sec_base = runs["random"].best_sec["sec_mec"] if "random" in runs else np.nan
    df["acc_vs_baseline"] = df["acc"] - acc_base
    df["sec_vs_baseline"] = df["sec_mec"] - sec_base
    return df


# ──────────────────────────────────────────────
# Figures
# ──────────────────────────────────────────────
def _save(fig, path: str):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_pareto(runs: dict[str, RunData], path: str) -> str:
    """Designs explored by the engine and by random search, with their fronts."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    lowest = 0.0
    for name in ("random", "engine"):
        if name not in runs:
            continue
        df = runs[name].episodes
        color = _COLORS[name]
        ax.scatter(df["acc"], df["sec_mec"], s=12, alpha=0.4, color=color, label=f"{name} designs")
        front = _front(df)
        ax.plot(front["acc"], front["sec_mec"], color=color, linewidth=1.5, label=f"{name} front")
        if len(df):
            lowest = min(lowest, float(df["sec_mec"].min()))
    ax.scatter([1.0], [1.0], marker="*", s=160, color="gold", edgecolor="black", label="ideal", zorder=3)
    ax.set_xlabel("accuracy")
    ax.set_ylabel("SecMec")
    ax.set_xlim(0.0, 1.05)
    ax.set_ylim(clamp(lowest - 0.05, -1.0, 0.0), 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    return path


def plot_acc_vs_secacc(table: pd.DataFrame, path: str) -> str:
    """Model accuracy next to the best stolen-submodel accuracy, per design."""
    labels = [m if p == "-" else f"{m} ({p})" for m, p in zip(table["method"], table["pick"])]
    x = np.arange(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(labels)), 4.0))
    ax.bar(x - width / 2, table["acc"], width, label="accuracy", color="tab:green")
    ax.bar(x + width / 2, table["sec_acc"], width, label="SecAcc", color="tab:gray")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    return path


def write_report(root: str, out_dir: str | None = None, naive_path: str | None = None) -> dict[str, str]:
    """summary.csv, pareto.svg and acc_vs_secacc.svg from the runs under `root`."""
    runs = find_runs(root)
    if not runs:
        raise FileNotFoundError(f"no search outputs under {root}")
    naive = _metrics(naive_path) if naive_path else None
    out_dir = out_dir or os.path.join(root, "report")
    os.makedirs(out_dir, exist_ok=True)

    table = summary_table(runs, naive)
    paths = {SUMMARY_CSV: os.path.join(out_dir, SUMMARY_CSV)}
    table.to_csv(paths[SUMMARY_CSV], index=False, float_format="%.4f")
    paths[PARETO_SVG] = plot_pareto(runs, os.path.join(out_dir, PARETO_SVG))
    paths[ACC_SECACC_SVG] = plot_acc_vs_secacc(table, os.path.join(out_dir, ACC_SECACC_SVG))
    log.info("report for %s written to %s", ", ".join(runs), out_dir)
    return paths
