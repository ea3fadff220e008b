"""Report emission: curve CSV, records JSONL, summary JSON, and rendered curve figures."""

from __future__ import annotations

import json
import os

from .harness import CurveBin, RobustnessCurve

CURVE_COLUMNS = (
    "bin_lo,bin_hi,rho_mean,pcc_mean,pcc_q25,pcc_q75,scc_mean,roc_mean,"
    "top10,top30,top50,sem_sim,count"
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def curve_csv_text(curve: RobustnessCurve) -> str:
    lines = [CURVE_COLUMNS]
    for b in curve.bins:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    b.lo, b.hi, b.rho_mean, b.pcc_mean, b.pcc_q25, b.pcc_q75,
                    b.scc_mean, b.roc_mean, b.top10, b.top30, b.top50, b.sem_sim,
                    b.count,
                )
            )
        )
    return "\n".join(lines) + "\n"


def parse_curve_csv(path) -> list[CurveBin]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != CURVE_COLUMNS:
        raise ValueError(f"{path}: not a curve CSV")
    bins = []
    for ln in lines[1:]:
        f = ln.split(",")
        bins.append(
            CurveBin(
                lo=float(f[0]), hi=float(f[1]), rho_mean=float(f[2]), pcc_mean=float(f[3]),
                pcc_q25=float(f[4]), pcc_q75=float(f[5]), scc_mean=float(f[6]),
                roc_mean=float(f[7]), top10=float(f[8]), top30=float(f[9]),
                top50=float(f[10]), sem_sim=float(f[11]) if f[11] else None,
                count=int(f[12]),
            )
        )
    return bins


def summary_payload(curve: RobustnessCurve, config_echo: dict, extra: dict | None = None) -> dict:
    payload = {
        "acc": curve.acc,
        "ceiling": curve.ceiling,
        "binned_count": curve.binned_count,
        "zero_rho_count": curve.zero_rho_count,
        "degenerate_count": curve.degenerate_count,
        "config": config_echo,
    }
    if extra:
        payload.update(extra)
    return payload


def emit_report(
    curve: RobustnessCurve,
    records,
    outdir,
    config_echo: dict,
    extra: dict | None = None,
    figures: bool = True,
) -> dict[str, str]:
    """Write curve.csv, records.jsonl and summary.json (plus figures) into ``outdir``.

    Output bytes depend only on the inputs, so identical runs produce identical
    files.
    """
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "curve": os.path.join(outdir, "curve.csv"),
        "records": os.path.join(outdir, "records.jsonl"),
        "summary": os.path.join(outdir, "summary.json"),
    }
    with open(paths["curve"], "w", encoding="utf-8", newline="") as fh:
        fh.write(curve_csv_text(curve))
    with open(paths["records"], "w", encoding="utf-8", newline="") as fh:
        for rec in records:
            fh.write(rec.to_json_line())
            fh.write("\n")
    with open(paths["summary"], "w", encoding="utf-8", newline="") as fh:
        json.dump(summary_payload(curve, config_echo, extra), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if figures:
        paths["figure"] = render_curve_figure(curve, os.path.join(outdir, "curve.png"))
    return paths


def render_curve_figure(curve: RobustnessCurve, path, title: str | None = None) -> str:
    """Render the binned correlation/intersection curves to a PNG next to the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    filled = [b for b in curve.bins if b.count > 0]
    xs = [0.0] + [b.rho_mean for b in filled]
    fig, (ax_corr, ax_top) = plt.subplots(1, 2, figsize=(9.0, 3.4), sharex=True)
    series_corr = [
        ("PCC", [1.0] + [b.pcc_mean for b in filled], "o"),
        ("SCC", [1.0] + [b.scc_mean for b in filled], "D"),
        ("ROC", [1.0] + [b.roc_mean for b in filled], "^"),
    ]
    for name, ys, marker in series_corr:
        ax_corr.plot(xs, ys, marker=marker, markersize=3.5, linewidth=1.2, label=name)
    if filled:
        ax_corr.fill_between(
            [b.rho_mean for b in filled],
            [b.pcc_q25 for b in filled],
            [b.pcc_q75 for b in filled],
            alpha=0.2,
        )
    ax_corr.set_xlabel("perturbed ratio")
    ax_corr.set_ylabel("correlation")
    ax_corr.set_ylim(-1.05, 1.05)
    ax_corr.grid(True, linestyle="--", alpha=0.5)
    ax_corr.legend(loc="lower left", fontsize=8)
    ax_corr.annotate(f"ACC: {curve.acc:.3f}", xy=(0.97, 0.92), xycoords="axes fraction",
                     ha="right", fontsize=9)

    series_top = [
        ("Top-10%", [1.0] + [b.top10 for b in filled], "o"),
        ("Top-30%", [1.0] + [b.top30 for b in filled], "^"),
        ("Top-50%", [1.0] + [b.top50 for b in filled], "D"),
    ]
    for name, ys, marker in series_top:
        ax_top.plot(xs, ys, marker=marker, markersize=3.5, linewidth=1.2, label=name)
    ax_top.set_xlabel("perturbed ratio")
    ax_top.set_ylabel("top-k intersection")
    ax_top.set_ylim(-0.05, 1.05)
    ax_top.grid(True, linestyle="--", alpha=0.5)
    ax_top.legend(loc="lower left", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)
