"""Report surfaces: the runs CSV, comparison summaries, and SVG curves.

CSV schema (runs): architecture,seed,episode,split,accuracy,loss with a
mandatory header, UTF-8, LF line endings, rows sorted by (architecture,
seed, episode, split). Identical inputs re-export byte-identically.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .harness import ComparisonReport, RunRecord

RUNS_HEADER = ("architecture", "seed", "episode", "split", "accuracy", "loss")


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def run_rows(records: Sequence[RunRecord]) -> list[tuple]:
    rows = []
    for rec in records:
        for row in rec.rows:
            rows.append((rec.arch, rec.seed, row["episode"], "ood",
                         row["ood_accuracy"], row["ood_loss"]))
            rows.append((rec.arch, rec.seed, row["episode"], "train",
                         row["train_accuracy"], row["train_loss"]))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return rows


def runs_csv_text(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUNS_HEADER)
    for arch, seed, episode, split, acc, loss in run_rows(records):
        writer.writerow([arch, seed, episode, split, _fmt(acc), _fmt(loss)])
    return buf.getvalue()


def write_runs_csv(records: Sequence[RunRecord], path: str | Path) -> None:
    Path(path).write_text(runs_csv_text(records), encoding="utf-8", newline="\n")


def read_runs_csv(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {"architecture": r["architecture"], "seed": int(r["seed"]),
             "episode": int(r["episode"]), "split": r["split"],
             "accuracy": float(r["accuracy"]), "loss": float(r["loss"])}
            for r in reader
        ]


def summary_text(report: ComparisonReport) -> str:
    lines = [f"experiment {report.experiment_hash}", ""]
    lines.append("architecture  episodes-to-criterion(median)  best-OOD(median)  aborted")
    for arch, s in sorted(report.stats.items()):
        censored = f" ({s['criterion_censored_runs']} censored)" if s["criterion_censored_runs"] else ""
        lines.append(f"  {arch:<12} {s['median_episodes_to_criterion']:>12.0f}{censored:<16}"
                     f" {s['median_best_ood']:>8.3f}        {s['aborted_runs']}")
    if report.ratios:
        lines.append("")
        lines.append("episodes-to-criterion ratios")
        for key, val in sorted(report.ratios.items()):
            lines.append(f"  {key:<28} {val:.3f}")
    lines.append("")
    return "\n".join(lines)


def write_ib_csv(rows: Sequence[dict], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("channel", "i_xz", "i_zy", "objective"))
    for row in rows:
        writer.writerow([row["channel"], _fmt(row["i_xz"]), _fmt(row["i_zy"]),
                         _fmt(row["objective"])])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# SVG learning curves (no external renderer)

_W, _H = 720, 440
_ML, _MR, _MT, _MB = 60, 160, 30, 50
_PALETTE = ("#1b6ca8", "#c0392b", "#2d7a3a", "#8e44ad", "#d4820a", "#455a64")


def _svg_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def curves_svg(rows: Sequence[dict], split: str = "ood",
               title: str = "OOD accuracy by training episodes") -> str:
    """Polyline chart of accuracy vs episodes, one line per (arch, seed)."""
    series: dict[tuple, list[tuple[int, float]]] = {}
    for r in rows:
        if r["split"] != split:
            continue
        series.setdefault((r["architecture"], r["seed"]), []).append(
            (r["episode"], r["accuracy"]))
    max_ep = max((ep for pts in series.values() for ep, _ in pts), default=1)
    archs = sorted({a for a, _ in series})
    color = {a: _PALETTE[i % len(_PALETTE)] for i, a in enumerate(archs)}

    def sx(ep):
        return _ML + (ep / max_ep) * (_W - _ML - _MR)

    def sy(acc):
        return _H - _MB - acc * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_ML}" y="18" font-size="13" font-family="sans-serif">'
        f"{_svg_escape(title)}</text>",
        f'<line x1="{_ML}" y1="{sy(0)}" x2="{_W - _MR}" y2="{sy(0)}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{sy(0)}" x2="{_ML}" y2="{sy(1)}" stroke="black"/>',
        f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" font-size="12" '
        f'font-family="sans-serif" text-anchor="middle">training episodes</text>',
        f'<text x="16" y="{(_H - _MB + _MT) / 2}" font-size="12" font-family="sans-serif" '
        f'transform="rotate(-90 16 {(_H - _MB + _MT) / 2})" text-anchor="middle">accuracy</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{_ML - 8}" y="{sy(frac) + 4}" font-size="10" '
                     f'font-family="sans-serif" text-anchor="end">{frac:g}</text>')
        parts.append(f'<line x1="{_ML - 4}" y1="{sy(frac)}" x2="{_ML}" y2="{sy(frac)}" '
                     f'stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        ep = int(round(frac * max_ep))
        parts.append(f'<text x="{sx(ep)}" y="{_H - _MB + 16}" font-size="10" '
                     f'font-family="sans-serif" text-anchor="middle">{ep}</text>')
    for (arch, seed), pts in sorted(series.items()):
        pts = sorted(pts)
        coords = " ".join(f"{sx(ep):.2f},{sy(acc):.2f}" for ep, acc in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color[arch]}" stroke-width="1.2" opacity="0.75"/>')
    for i, arch in enumerate(archs):
        y = _MT + 16 + 16 * i
        parts.append(f'<line x1="{_W - _MR + 10}" y1="{y - 4}" x2="{_W - _MR + 34}" '
                     f'y2="{y - 4}" stroke="{color[arch]}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR + 40}" y="{y}" font-size="11" '
                     f'font-family="sans-serif">{_svg_escape(arch)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_curves_svg(rows: Sequence[dict], path: str | Path, split: str = "ood") -> None:
    Path(path).write_text(curves_svg(rows, split=split), encoding="utf-8", newline="\n")


def export_report(report: ComparisonReport, out_dir: str | Path) -> dict[str, Path]:
    """CSV + summary + SVG curves for a comparison; bit-stable ordering."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "runs": out / "runs.csv",
        "summary": out / "summary.txt",
        "curves": out / "curves.svg",
    }
    write_runs_csv(report.records, paths["runs"])
    paths["summary"].write_text(summary_text(report), encoding="utf-8", newline="\n")
    rows = read_runs_csv(paths["runs"])
    write_curves_svg(rows, paths["curves"])
    return paths
