"""Report tables built from experiment and collect directories.

Every table is a list of dict rows with a fixed field tuple; it is written
as a UTF-8 CSV with a header row and rendered as aligned plain text.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .compare import mann_whitney_one_sided, median_with_infinity, time_to_threshold, vargha_delaney
from .linear import (PairDataset, fit_linear_model, interaction_report, write_residuals_csv,
                     IMBALANCE_LIMIT)

GOF_FIELDS = ("target", "r2_additive", "r2_interaction", "delta_r2",
              "r2_adj_additive", "r2_adj_interaction", "delta_r2_adj")
ANOVA_FIELDS = ("target", "status", "test", "statistic", "df_num", "df_den", "p_value", "stars",
                "f_classical", "p_classical", "chi2_hc3", "p_hc3", "breusch_pagan_p",
                "skewness", "excess_kurtosis", "jarque_bera", "jb_p_value", "lag1_autocorrelation",
                "imbalance", "imbalance_flag")
COMPARISON_FIELDS = ("target", "strategy", "baseline", "trials", "median", "std",
                     "median_baseline", "std_baseline", "u", "p_value", "stars", "a12")
TIME_FIELDS = ("target", "strategy", "baseline", "threshold", "by_baseline", "by_strategy",
               "delta", "strategy_reached")
ABLATION_FIELDS = ("target", "variant", "trials", "median", "std", "median_baseline",
                   "p_value", "stars", "a12", "better_than_baseline")

ABLATION_MARKER = "ablation.json"


def stars(p: float | None) -> str:
    """***: p < 0.01, **: p < 0.05, *: p < 0.1."""
    if p is None or math.isnan(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


# --- rendering ---------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        if math.isnan(v):
            return "NaN"
        if v != 0 and (abs(v) >= 1e6 or abs(v) < 1e-4):
            return f"{v:.3e}"
        return f"{v:.4f}"
    return str(v)


def render_table(fields: Sequence[str], rows: Iterable[Mapping]) -> str:
    body = [[_cell(r.get(f)) for f in fields] for r in rows]
    widths = [max([len(f)] + [len(b[i]) for b in body]) for i, f in enumerate(fields)]
    lines = ["  ".join(f.ljust(w) for f, w in zip(fields, widths)),
             "  ".join("-" * w for w in widths)]
    for b in body:
        lines.append("  ".join(c.rjust(w) if _numeric(c) else c.ljust(w)
                               for c, w in zip(b, widths)))
    return "\n".join(lines) + "\n"


def _numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def write_table(path: str | Path, fields: Sequence[str], rows: Sequence[Mapping]) -> Path:
    """Write ``<path>.csv`` and a rendered ``<path>.txt``; return the CSV path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({f: ("" if r.get(f) is None else r.get(f)) for f in fields})
    path.with_suffix(".txt").write_text(render_table(fields, rows), encoding="utf-8")
    return csv_path


# --- interaction analysis ----------------------------------------------------------

def goodness_of_fit_table(datasets: Mapping[str, PairDataset]) -> list[dict]:
    rows = []
    for target, ds in datasets.items():
        add = fit_linear_model(ds, with_interaction=False)
        full = fit_linear_model(ds, with_interaction=True)
        rows.append({"target": target,
                     "r2_additive": add.r2, "r2_interaction": full.r2,
                     "delta_r2": full.r2 - add.r2,
                     "r2_adj_additive": add.r2_adj, "r2_adj_interaction": full.r2_adj,
                     "delta_r2_adj": full.r2_adj - add.r2_adj})
    return rows


def anova_table(datasets: Mapping[str, PairDataset], residual_dir: str | Path | None = None) -> list[dict]:
    rows = []
    for target, ds in datasets.items():
        rep = interaction_report(ds)
        if residual_dir is not None:
            write_residuals_csv(rep.full, Path(residual_dir) / f"residuals_{target}.csv")
        chosen = rep.anova
        d = rep.diagnostics
        rows.append({
            "target": target, "status": rep.status,
            "test": chosen.variant if chosen else None,
            "statistic": chosen.statistic if chosen else None,
            "df_num": chosen.df_num if chosen else None,
            "df_den": chosen.df_den if chosen else None,
            "p_value": chosen.p_value if chosen else None,
            "stars": stars(chosen.p_value) if chosen else "",
            "f_classical": rep.classical.statistic, "p_classical": rep.classical.p_value,
            "chi2_hc3": rep.hc3.statistic, "p_hc3": rep.hc3.p_value,
            "breusch_pagan_p": rep.bp_p_value,
            "skewness": d.skewness, "excess_kurtosis": d.excess_kurtosis,
            "jarque_bera": d.jarque_bera, "jb_p_value": d.jb_p_value,
            "lag1_autocorrelation": d.lag1_autocorrelation,
            "imbalance": rep.imbalance, "imbalance_flag": rep.imbalance > IMBALANCE_LIMIT,
        })
    return rows


def write_mean_matrix(ds: PairDataset, path: str | Path) -> None:
    """Counts averaged over trials, one row per first mutator."""
    mean = ds.mean_matrix()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(np.unique(ds.j).tolist())
        for row in mean:
            w.writerow([repr(float(v)) for v in row])


# --- strategy comparison -----------------------------------------------------------

def _finals(summary: Sequence[Mapping]) -> dict[tuple[str, str], list[int]]:
    out: dict[tuple[str, str], list[tuple[int, int]]] = defaultdict(list)
    for r in summary:
        out[(r["target"], r["strategy"])].append((int(r["trial"]), int(r["final_coverage"])))
    return {k: [c for _, c in sorted(v)] for k, v in out.items()}


def _strategies(summary: Sequence[Mapping]) -> dict[str, list[str]]:
    """Strategies per target, in first-appearance order."""
    out: dict[str, list[str]] = {}
    for r in summary:
        names = out.setdefault(r["target"], [])
        if r["strategy"] not in names:
            names.append(r["strategy"])
    return out


def _std(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(x.std(ddof=1)) if x.size > 1 else 0.0


def comparison_table(summary: Sequence[Mapping], baseline: str | None = None) -> list[dict]:
    """Median final coverage, one-sided Mann-Whitney p and A12 per strategy pair.

    With ``baseline`` every other strategy is compared against it; without,
    every ordered pair is reported.  The test asks whether ``strategy``
    reaches higher coverage than ``baseline``.
    """
    finals = _finals(summary)
    rows = []
    for target, names in _strategies(summary).items():
        pairs = ([(s, baseline) for s in names if s != baseline] if baseline in names
                 else [(a, b) for a in names for b in names if a != b])
        for a, b in pairs:
            xa, xb = finals[(target, a)], finals[(target, b)]
            mw = mann_whitney_one_sided(xa, xb)
            rows.append({"target": target, "strategy": a, "baseline": b, "trials": len(xa),
                         "median": float(np.median(xa)), "std": _std(xa),
                         "median_baseline": float(np.median(xb)), "std_baseline": _std(xb),
                         "u": mw.u, "p_value": mw.p_value, "stars": stars(mw.p_value),
                         "a12": vargha_delaney(xa, xb)})
    return rows


def time_table(summary: Sequence[Mapping], curves: Mapping[tuple[str, str], Sequence],
               baseline: str | None = None) -> list[dict]:
    """Median exec_index at which each strategy reaches the baseline's final median.

    ``by_baseline`` is the baseline's own median time to that coverage;
    ``delta = by_baseline - by_strategy`` (positive: the strategy is faster).
    Unreached medians are reported empty.
    """
    finals = _finals(summary)
    rows = []
    for target, names in _strategies(summary).items():
        pairs = ([(s, baseline) for s in names if s != baseline] if baseline in names
                 else [(a, b) for a in names for b in names if a != b])
        for a, b in pairs:
            threshold = float(np.median(finals[(target, b)]))
            by_b = time_to_threshold(curves[(target, b)], threshold).median
            by_a = time_to_threshold(curves[(target, a)], threshold).median
            rows.append({"target": target, "strategy": a, "baseline": b, "threshold": threshold,
                         "by_baseline": by_b, "by_strategy": by_a,
                         "delta": (by_b - by_a) if by_a is not None and by_b is not None else None,
                         "strategy_reached": by_a is not None})
    return rows


def ablation_table(summary: Sequence[Mapping], baseline: str = "pairwise") -> list[dict]:
    """One row per (target, variant): median, std and the test against ``baseline``."""
    finals = _finals(summary)
    rows = []
    for target, names in _strategies(summary).items():
        if baseline not in names:
            raise ValueError(f"ablation summary for {target} lacks the {baseline!r} baseline")
        xb = finals[(target, baseline)]
        for v in names:
            xv = finals[(target, v)]
            row = {"target": target, "variant": v, "trials": len(xv),
                   "median": float(np.median(xv)), "std": _std(xv),
                   "median_baseline": float(np.median(xb)),
                   "better_than_baseline": bool(np.median(xv) > np.median(xb))}
            if v != baseline:
                mw = mann_whitney_one_sided(xv, xb)
                row.update(p_value=mw.p_value, stars=stars(mw.p_value), a12=vargha_delaney(xv, xb))
            rows.append(row)
    return rows


def ablation_wide(rows: Sequence[Mapping]) -> tuple[tuple[str, ...], list[dict]]:
    """Targets as rows, ``<variant>_median`` / ``<variant>_std`` column pairs."""
    variants: list[str] = []
    by_target: dict[str, dict] = {}
    for r in rows:
        if r["variant"] not in variants:
            variants.append(r["variant"])
        t = by_target.setdefault(r["target"], {"target": r["target"]})
        t[f"{r['variant']}_median"] = r["median"]
        t[f"{r['variant']}_std"] = r["std"]
    fields = ("target",) + tuple(f"{v}_{s}" for v in variants for s in ("median", "std"))
    return fields, list(by_target.values())


# --- directories -------------------------------------------------------------------

def read_summary(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key in ("trial", "final_coverage"):
            r[key] = int(r[key])
    return rows


def load_curves(directory: str | Path) -> dict[tuple[str, str], list]:
    """Coverage curves of every saved trial, keyed by (target, strategy), in trial order."""
    out: dict[tuple[str, str], list] = defaultdict(list)
    records = sorted(Path(directory, "trials").glob("*/record.json"))
    for p in records:
        d = json.loads(p.read_text(encoding="utf-8"))
        cfg = d["config"]
        name = cfg.get("label") or cfg["mode"]
        out[(cfg["target"], name)].append((cfg["trials"], [tuple(x) for x in d["coverage_curve"]]))
    return {k: [c for _, c in sorted(v)] for k, v in out.items()}


def load_dataset(directory: str | Path) -> tuple[str, PairDataset]:
    """(target, dataset) from a collect directory's matrices and summary."""
    from ..campaign import load_matrices

    directory = Path(directory)
    target = directory.name
    summary = directory / "summary.csv"
    if summary.exists():
        targets = {r["target"] for r in read_summary(summary)}
        if len(targets) == 1:
            target = targets.pop()
    return target, PairDataset.from_matrices(load_matrices(directory))


def analyze_collect(directories: Sequence[str | Path], out_dir: str | Path) -> dict[str, Path]:
    """Goodness-of-fit and ANOVA tables over one or more collect directories."""
    out = Path(out_dir)
    datasets = dict(load_dataset(d) for d in directories)
    written = {
        "goodness_of_fit": write_table(out / "goodness_of_fit", GOF_FIELDS,
                                       goodness_of_fit_table(datasets)),
        "anova": write_table(out / "anova", ANOVA_FIELDS, anova_table(datasets, residual_dir=out)),
    }
    for target, ds in datasets.items():
        write_mean_matrix(ds, out / f"mean_matrix_{target}.csv")
    return written


def analyze_experiment(directory: str | Path, out_dir: str | Path,
                       baseline: str | None = None) -> dict[str, Path]:
    """Comparison and time-to-threshold tables; the ablation tables too when marked."""
    directory, out = Path(directory), Path(out_dir)
    summary = read_summary(directory / "summary.csv")
    marker = directory / ABLATION_MARKER
    if marker.exists() and baseline is None:
        baseline = json.loads(marker.read_text(encoding="utf-8")).get("baseline", "pairwise")
    written = {"comparison": write_table(out / "comparison", COMPARISON_FIELDS,
                                         comparison_table(summary, baseline))}
    curves = load_curves(directory)
    if curves:
        written["time_to_threshold"] = write_table(out / "time_to_threshold", TIME_FIELDS,
                                                   time_table(summary, curves, baseline))
    if marker.exists():
        rows = ablation_table(summary, baseline or "pairwise")
        written["ablation"] = write_table(out / "ablation", ABLATION_FIELDS, rows)
        fields, wide = ablation_wide(rows)
        written["ablation_table"] = write_table(out / "ablation_table", fields, wide)
    return written


def analyze_directory(directories: Sequence[str | Path], out_dir: str | Path | None = None,
                      baseline: str | None = None) -> dict[str, Path]:
    """Dispatch on directory kind: collect (``matrices/``) or experiment (``summary.csv``)."""
    dirs = [Path(d) for d in directories]
    if not dirs:
        raise ValueError("nothing to analyze")
    out = Path(out_dir) if out_dir else dirs[0] / "report"
    collect = [d for d in dirs if (d / "matrices").is_dir()]
    experiments = [d for d in dirs if d not in collect]
    written: dict[str, Path] = {}
    if collect:
        written.update(analyze_collect(collect, out))
    for d in experiments:
        if not (d / "summary.csv").exists():
            raise FileNotFoundError(f"{d} has neither matrices/ nor summary.csv")
        sub = out if len(experiments) == 1 else out / d.name
        written.update(analyze_experiment(d, sub, baseline))
    return written


__all__ = [
    "ABLATION_FIELDS", "ANOVA_FIELDS", "COMPARISON_FIELDS", "GOF_FIELDS", "TIME_FIELDS",
    "ablation_table", "ablation_wide", "analyze_collect", "analyze_directory",
    "analyze_experiment", "anova_table", "comparison_table", "goodness_of_fit_table",
    "load_curves", "load_dataset", "median_with_infinity", "read_summary", "render_table",
    "stars", "time_table", "write_table",
]
