"""Render a construction or a recorded session to files.

Given a construction document (JSON) or a recorded session log (JSONL),
writes a PNG figure of the evaluated geometry next to a CSV summary:
one row per step for constructions, one row per event for logs.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import kernel, recording

FIGURE_PAD = 1.0


def _figure_bounds(values: kernel.Evaluation):
    xs, ys = [], []
    for v in values.values():
        if isinstance(v, kernel.Point):
            xs.append(v.x)
            ys.append(v.y)
        elif isinstance(v, kernel.Segment):
            xs += [v.x1, v.x2]
            ys += [v.y1, v.y2]
        elif isinstance(v, kernel.Circle):
            xs += [v.cx - v.r, v.cx + v.r]
            ys += [v.cy - v.r, v.cy + v.r]
    if not xs:
        return (-1, 1, -1, 1)
    return (min(xs) - FIGURE_PAD, max(xs) + FIGURE_PAD,
            min(ys) - FIGURE_PAD, max(ys) + FIGURE_PAD)


def render_construction(c: kernel.Construction, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    values = kernel.evaluate(c)
    x0, x1, y0, y1 = _figure_bounds(values)
    fig, ax = plt.subplots(figsize=(6, 6))
    for sid, v in values.items():
        if isinstance(v, kernel.Point):
            ax.plot([v.x], [v.y], "o", color="tab:blue")
            ax.annotate(str(sid), (v.x, v.y), textcoords="offset points",
                        xytext=(4, 4), fontsize=8)
        elif isinstance(v, kernel.Segment):
            ax.plot([v.x1, v.x2], [v.y1, v.y2], "-", color="tab:green")
        elif isinstance(v, kernel.Circle):
            ax.add_patch(plt.Circle((v.cx, v.cy), v.r, fill=False,
                                    color="tab:orange"))
        elif isinstance(v, kernel.Line):
            # clip ax + by + c = 0 to the viewport by walking its direction
            px, py = -v.a * v.c, -v.b * v.c
            dx, dy = -v.b, v.a
            span = 2 * max(x1 - x0, y1 - y0, 1.0)
            ax.plot([px - span * dx, px + span * dx],
                    [py - span * dy, py + span * dy], "-", color="tab:gray")
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=100)
    plt.close(fig)


def _value_cells(v: kernel.GeometryValue):
    if isinstance(v, kernel.Point):
        return "point", f"({v.x:.6g}, {v.y:.6g})"
    if isinstance(v, kernel.Line):
        return "line", f"{v.a:.6g}x + {v.b:.6g}y + {v.c:.6g} = 0"
    if isinstance(v, kernel.Circle):
        return "circle", f"center ({v.cx:.6g}, {v.cy:.6g}) r {v.r:.6g}"
    if isinstance(v, kernel.Segment):
        return "segment", f"({v.x1:.6g}, {v.y1:.6g})-({v.x2:.6g}, {v.y2:.6g})"
    return "undefined", ""


def write_construction_csv(c: kernel.Construction, path: Path) -> None:
    values = kernel.evaluate(c)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "kind", "inputs", "params", "value_kind", "value"])
        for step in c.steps:
            kind, detail = _value_cells(values[step.id])
            w.writerow([
                step.id, step.kind.value,
                " ".join(str(i) for i in step.inputs),
                " ".join(f"{p:.6g}" for p in step.params),
                kind, detail,
            ])


def write_log_csv(log: recording.SessionLog, path: Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "ts", "type", "detail"])
        for i, ev in enumerate(log.events):
            obj = recording.event_to_obj(ev)
            if obj["type"] == "nav":
                detail = f"page {obj['page']}"
            else:
                detail = " ".join(f"{k}={obj[k]}" for k in sorted(obj)
                                  if k not in ("ts", "type"))
            w.writerow([i, ev.ts, obj["type"], detail])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolab-report",
        description="Render a construction or session log to PNG and CSV.",
    )
    parser.add_argument("input", help="construction .json or session log .jsonl")
    parser.add_argument("--out-dir", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    src = Path(args.input)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        data = src.read_bytes()
    except OSError as exc:
        print(f"geolab-report: {exc}", file=sys.stderr)
        return 2

    stem = src.stem
    try:
        if src.suffix == ".jsonl":
            log = recording.import_log(data)
            construction = recording.reconstruct_at(log, len(log.events))[0]
            write_log_csv(log, out_dir / f"{stem}.csv")
        else:
            construction = kernel.parse_construction(data)
            write_construction_csv(construction, out_dir / f"{stem}.csv")
    except (kernel.ParseError, recording.RecordingError) as exc:
        print(f"geolab-report: cannot read {src}: {exc}", file=sys.stderr)
        return 2

    render_construction(construction, out_dir / f"{stem}.png")
    print(out_dir / f"{stem}.png")
    print(out_dir / f"{stem}.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
