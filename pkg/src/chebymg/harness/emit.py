"""CSV and SVG output for case and sweep results."""

from __future__ import annotations

import csv
import io
import os
from collections import defaultdict

COLUMNS = (
    "case_id", "L_x", "factor", "family", "k_pre", "k_post", "cycle", "driver",
    "iterations", "fine_matvecs", "rho", "C_est", "lambda_tilde", "lambda_min_mult",
    "converged", "time_ms",
)
INT_COLUMNS = ("factor", "k_pre", "k_post", "iterations", "fine_matvecs")
FLOAT_COLUMNS = ("L_x", "rho", "C_est", "lambda_tilde", "lambda_min_mult", "time_ms")


def to_record(result, timing: bool = True) -> dict:
    """Typed CSV record for a :class:`~chebymg.harness.runner.CaseResult`."""
    cfg, rep = result.config, result.report
    return {
        "case_id": cfg.case_id,
        "L_x": float(cfg.Lx),
        "factor": cfg.factor,
        "family": cfg.family,
        "k_pre": cfg.k_pre,
        "k_post": cfg.k_post,
        "cycle": cfg.cycle,
        "driver": cfg.driver,
        "iterations": rep.iterations if rep else None,
        "fine_matvecs": rep.fine_matvecs if rep else None,
        "rho": rep.rho if rep else None,
        "C_est": result.C_est,
        "lambda_tilde": result.lambda_tilde,
        "lambda_min_mult": result.lambda_min_mult,
        "converged": bool(rep and rep.converged),
        "time_ms": rep.wall_time * 1e3 if (rep and timing) else None,
    }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(col, text):
    if text == "":
        return None
    if col == "converged":
        return text == "true"
    if col in INT_COLUMNS:
        return int(text)
    if col in FLOAT_COLUMNS:
        return float(text)
    return text


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow([_fmt(rec[c]) for c in COLUMNS])
    return buf.getvalue()


def parse_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError("unexpected CSV header")
    return [{c: _parse(c, v) for c, v in zip(COLUMNS, row)} for row in rows[1:]]


def write_csv(results, path, timing: bool = True) -> str:
    records = [to_record(r, timing) for r in results]
    if not records:
        raise ValueError("nothing to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(records))
    return str(path)


def read_csv(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read())


def write_svgs(results, out_dir, prefix: str = "sweep") -> list:
    """One SVG per ``(L_x, factor)``: fine applications and iterations vs ``k``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    results = list(results)
    if not results:
        raise ValueError("nothing to plot")
    panels = defaultdict(lambda: defaultdict(list))
    for r in results:
        if not r.ok:
            continue
        c = r.config
        panels[(c.Lx, c.factor)][(c.family, c.cycle)].append(
            (c.k, r.report.fine_matvecs, r.report.iterations))
    for r in results:
        panels.setdefault((r.config.Lx, r.config.factor), defaultdict(list))
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    with plt.rc_context({"svg.hashsalt": "chebymg", "svg.fonttype": "none"}):
        for (Lx, factor), lines in sorted(panels.items()):
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
            for (family, cycle), pts in sorted(lines.items()):
                pts.sort()
                ks = [p[0] for p in pts]
                style = "-" if cycle == "full" else "--"
                ax1.plot(ks, [p[1] for p in pts], style, marker="o", label=f"{family} {cycle}")
                ax2.plot(ks, [p[2] for p in pts], style, marker="o", label=f"{family} {cycle}")
            ax1.set_xlabel("k")
            ax1.set_ylabel("fine-grid matvecs")
            ax2.set_xlabel("k")
            ax2.set_ylabel("iterations")
            fig.suptitle(f"L_x = {Lx:g}, n_c = n/{factor}")
            if lines:
                ax2.legend(fontsize="small")
            fig.tight_layout()
            path = os.path.join(out_dir, f"{prefix}-Lx{Lx:g}-f{factor}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths


def emit(results, out_dir, formats=("csv",), name: str = "results", timing: bool = True) -> list:
    """Write ``results`` to ``out_dir`` in each of ``formats`` (csv, svg)."""
    results = list(results)
    if not results:
        raise ValueError("nothing to emit")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    paths = []
    for fmt in formats:
        if fmt == "csv":
            paths.append(write_csv(results, os.path.join(out_dir, f"{name}.csv"), timing))
        elif fmt == "svg":
            paths.extend(write_svgs(results, out_dir, prefix=name))
        else:
            raise ValueError(f"unknown format {fmt!r}")
    return paths
