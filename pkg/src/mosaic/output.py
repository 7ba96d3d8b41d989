"""Trace CSV, run summaries and SVG plots."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from .sim import AttackOutcome, RunSummary, SimTrace, StepRecord  # noqa: E402

FIXED_COLUMNS = (
    "step",
    "lambda2_true",
    "lambda2_perceived",
    "jam_links_removed",
    "spoof_active",
    "quarantined_count",
    "gne_rounds",
    "gne_converged",
    "lambda_floor_violation",
)

ATTACK_COLORS = {"jam": "tab:red", "spoof": "tab:orange", "node_loss": "tab:purple"}


class OutputError(OSError):
    pass


def fmt(x: float) -> str:
    return f"{x:.9g}"


def csv_header(agent_ids) -> list[str]:
    cols = list(FIXED_COLUMNS)
    for i in agent_ids:
        cols += [f"agent{i}_x", f"agent{i}_y", f"agent{i}_status"]
    return cols


def trace_to_csv(trace: SimTrace) -> str:
    if not trace.records:
        raise ValueError("empty trace")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(trace.agent_ids))
    for r in trace.records:
        row = [
            r.step,
            fmt(r.lambda2_true),
            fmt(r.lambda2_perceived),
            r.jam_links_removed,
            int(r.spoof_active),
            r.quarantined_count,
            r.gne_rounds,
            int(r.gne_converged),
            int(r.lambda_floor_violation),
        ]
        for i in trace.agent_ids:
            x, y = r.positions[i]
            row += [fmt(x), fmt(y), r.statuses[i]]
        w.writerow(row)
    return buf.getvalue()


def _write(path, data, mode="w"):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, mode, **({"newline": ""} if "b" not in mode else {})) as f:
            f.write(data)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
    return path


def emit_csv(trace: SimTrace, path) -> Path:
    return _write(path, trace_to_csv(trace))


def read_trace_csv(path, attacks=(), name=None) -> SimTrace:
    """Parse a trace CSV; attack windows come from the scenario, not the file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise OutputError(f"cannot read {path}: {e.strerror or e}") from e
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    if tuple(header[: len(FIXED_COLUMNS)]) != FIXED_COLUMNS:
        raise ValueError(f"{path}: unexpected header")
    ids = tuple(int(h[len("agent") : -2]) for h in header[len(FIXED_COLUMNS) :: 3])
    trace = SimTrace(agent_ids=ids, attacks=tuple(attacks), name=name or path.stem)
    k = len(FIXED_COLUMNS)
    for row in body:
        positions, statuses = {}, {}
        for n, i in enumerate(ids):
            x, y, s = row[k + 3 * n : k + 3 * n + 3]
            positions[i] = (float(x), float(y))
            statuses[i] = s
        trace.records.append(StepRecord(
            step=int(row[0]),
            lambda2_true=float(row[1]),
            lambda2_perceived=float(row[2]),
            jam_links_removed=int(row[3]),
            spoof_active=row[4] == "1",
            quarantined_count=int(row[5]),
            gne_rounds=int(row[6]),
            gne_converged=row[7] == "1",
            lambda_floor_violation=row[8] == "1",
            positions=positions,
            statuses=statuses,
        ))
    return trace


def summary_to_text(summary: RunSummary) -> str:
    return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"


def emit_summary(summary: RunSummary, path) -> Path:
    return _write(path, summary_to_text(summary))


def read_summary(path) -> RunSummary:
    d = json.loads(Path(path).read_text())
    d["attacks"] = tuple(AttackOutcome(**a) for a in d["attacks"])
    return RunSummary(**d)


def emit_plot(trace: SimTrace, path, stride: int = 5, max_snapshots: int = 8) -> Path:
    """lambda2 vs. step with attack windows shaded, above position snapshots every ``stride`` steps."""
    if not trace.records:
        raise ValueError("empty trace")
    matplotlib.rcParams["svg.hashsalt"] = "mosaic"
    steps = [r.step for r in trace.records]
    snaps = trace.records[:: max(1, stride)][:max_snapshots]
    fig = Figure(figsize=(max(8, 2 * len(snaps)), 6.5))
    grid = fig.add_gridspec(2, len(snaps), height_ratios=[1.4, 1])

    ax = fig.add_subplot(grid[0, :])
    for ev in trace.attacks:
        ax.axvspan(ev.start_step - 0.5, ev.end_step - 0.5, color=ATTACK_COLORS[ev.kind], alpha=0.15, lw=0)
    ax.plot(steps, [r.lambda2_true for r in trace.records], "-o", ms=3, label="true")
    ax.plot(steps, [r.lambda2_perceived for r in trace.records], "--", lw=1, label="perceived")
    ax.set_xlabel("step")
    ax.set_ylabel("algebraic connectivity")
    ax.set_title(trace.name)
    ax.legend(loc="best")

    markers = "o^sDv<>"
    for c, r in enumerate(snaps):
        sub = fig.add_subplot(grid[1, c])
        for i in trace.agent_ids:
            x, y = r.positions[i]
            quarantined = r.statuses[i] == "quarantined"
            sub.plot(x, y, "x" if quarantined else markers[i % len(markers)],
                     color="gray" if quarantined else f"C{i % 10}", ms=4)
        sub.set_title(f"step {r.step}", fontsize=8)
        sub.set_aspect("equal", adjustable="datalim")
        sub.tick_params(labelsize=6)
    fig.tight_layout()

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return _write(path, buf.getvalue())
