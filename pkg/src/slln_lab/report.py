"""Report rendering: consolidates the delimited outputs of one or more
runs (all sharing a single config hash) into summary figures and a
merged CSV table.
"""

import glob
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

from .errors import ConfigError
from .records import read_jsonl, read_summary_csv, write_summary_csv


def _collect(input_dir):
    jsonl_paths = sorted(glob.glob(os.path.join(input_dir, "*.jsonl")))
    csv_paths = sorted(glob.glob(os.path.join(input_dir, "*_summary.csv")))
    if not jsonl_paths and not csv_paths:
        raise ConfigError([f"no .jsonl or *_summary.csv inputs found in {input_dir}"])
    hashes = set()
    records = []
    for path in jsonl_paths:
        recs, seen = read_jsonl(path)
        records.extend(recs)
        hashes |= seen
    rows = []
    seed = -1
    for path in csv_paths:
        file_rows, h, seed = read_summary_csv(path)
        rows.extend(file_rows)
        if h:
            hashes.add(h)
    if len(hashes) > 1:
        raise ConfigError([f"mixed config hashes in {input_dir}: {sorted(hashes)}"])
    cfg_hash = next(iter(hashes)) if hashes else ""
    return records, rows, cfg_hash, seed


def _error_figure(rows, records, cfg_hash, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    if rows:
        ns = np.array([r["n"] for r in rows], dtype=float)
        med = np.array([r["median_error"] for r in rows])
        q10 = np.array([r["q10"] for r in rows])
        q90 = np.array([r["q90"] for r in rows])
        order = np.argsort(ns)
        ns, med, q10, q90 = ns[order], med[order], q10[order], q90[order]
        pos = med > 0
        ax.fill_between(ns[pos], np.maximum(q10[pos], 1e-300), q90[pos],
                        alpha=0.25, label="q10-q90")
        ax.loglog(ns[pos], med[pos], "o-", label="median sup error")
    elif records:
        by_n = {}
        for rec in records:
            by_n.setdefault(rec.n, []).append(rec.sup_error_sot)
        ns = sorted(by_n)
        med = [float(np.median(by_n[n])) for n in ns]
        ax.loglog(ns, med, "o-", label="median sup error")
    ax.set_xlabel("n")
    ax.set_ylabel("sup error over the time grid")
    ax.set_title(f"Error decay (config {cfg_hash or 'n/a'})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _tail_figure(rows, cfg_hash, path):
    tails = [r for r in rows if r.get("tail_freq", 0.0) > 0.0]
    if not tails:
        return False
    ns = np.array([r["n"] for r in tails], dtype=float)
    freq = np.array([r["tail_freq"] for r in tails])
    lo = np.array([r["wilson_lo"] for r in tails])
    hi = np.array([r["wilson_hi"] for r in tails])
    order = np.argsort(ns)
    ns, freq, lo, hi = ns[order], freq[order], lo[order], hi[order]
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    yerr = np.vstack([np.maximum(freq - lo, 0.0), np.maximum(hi - freq, 0.0)])
    ax.errorbar(ns, freq, yerr=yerr, fmt="s-", capsize=3, label="tail frequency")
    if np.sum(freq > 0) >= 2:
        slope, intercept = np.polyfit(np.log(ns[freq > 0]), np.log(freq[freq > 0]), 1)
        ax.loglog(ns, np.exp(intercept) * ns ** slope, "--",
                  label=f"fit slope {slope:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("P{sup error > epsilon}")
    ax.set_title(f"Tail decay (config {cfg_hash or 'n/a'})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_report(input_dir, output_dir) -> list:
    """Render figures and a consolidated summary CSV from a run directory.

    Refuses inputs whose embedded config hashes disagree.  Returns the
    list of files written.
    """
    records, rows, cfg_hash, seed = _collect(input_dir)
    os.makedirs(output_dir, exist_ok=True)
    written = []
    tag = cfg_hash or "report"
    fig_path = os.path.join(output_dir, f"errors_{tag}.png")
    _error_figure(rows, records, cfg_hash, fig_path)
    written.append(fig_path)
    tail_path = os.path.join(output_dir, f"tails_{tag}.png")
    if _tail_figure(rows, cfg_hash, tail_path):
        written.append(tail_path)
    if rows:
        merged = sorted({tuple(r[k] for k in ("n", "median_error", "q10", "q90",
                                              "tail_freq", "wilson_lo", "wilson_hi"))
                         for r in rows})
        csv_path = os.path.join(output_dir, f"report_summary_{tag}.csv")
        write_summary_csv(merged, csv_path, cfg_hash, seed)
        written.append(csv_path)
    return written
