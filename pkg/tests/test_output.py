import pytest

from mosaic.output import (
    FIXED_COLUMNS,
    OutputError,
    emit_csv,
    emit_plot,
    emit_summary,
    read_summary,
    read_trace_csv,
    summary_to_text,
    trace_to_csv,
)
from mosaic.scenario import parse_scenario
from mosaic.sim import SimTrace, run, summarize

from helpers import doc

ATTACKS = [
    {"kind": "jam", "start_step": 1, "duration": 2, "budget": 1},
    {"kind": "spoof", "start_step": 3, "duration": 2, "spoof": {"entry_position": [1.0, 1.0]}},
]


@pytest.fixture(scope="module")
def trace():
    return run(parse_scenario(doc(total_steps=8, attacks=ATTACKS, detection_delay=2)))


def test_header_and_format(trace):
    text = trace_to_csv(trace)
    lines = text.split("\n")
    assert "\r" not in text and text.endswith("\n")
    header = lines[0].split(",")
    assert tuple(header[:9]) == FIXED_COLUMNS
    assert header[9:12] == ["agent0_x", "agent0_y", "agent0_status"]
    assert len(header) == 9 + 3 * 4
    assert len(lines) == 1 + 8 + 1
    first = lines[1].split(",")
    assert first[0] == "0"
    # 9 significant digits, '.' separator
    assert float(first[1]) == float(f"{trace.records[0].lambda2_true:.9g}")


def test_empty_trace_errors(tmp_path):
    with pytest.raises(ValueError, match="empty trace"):
        emit_csv(SimTrace((0,)), tmp_path / "x.csv")
    with pytest.raises(ValueError, match="empty trace"):
        emit_plot(SimTrace((0,)), tmp_path / "x.svg")


def test_emit_twice_identical(trace, tmp_path):
    a, b = emit_csv(trace, tmp_path / "a.csv"), emit_csv(trace, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    s = summarize(trace)
    assert emit_summary(s, tmp_path / "a.json").read_bytes() == emit_summary(s, tmp_path / "b.json").read_bytes()
    p, q = emit_plot(trace, tmp_path / "a.svg"), emit_plot(trace, tmp_path / "b.svg")
    assert p.read_bytes() == q.read_bytes()


def test_csv_round_trip_summary(trace, tmp_path):
    cfg_attacks = trace.attacks
    path = emit_csv(trace, tmp_path / "small.csv")
    emitted = read_summary(emit_summary(summarize(trace), tmp_path / "small.summary.json"))
    parsed = read_trace_csv(path, attacks=cfg_attacks, name=trace.name)
    again = summarize(parsed)
    assert again.steps == emitted.steps
    assert again.steps_disconnected == emitted.steps_disconnected
    for f in ("min_lambda2", "mean_lambda2", "final_lambda2"):
        # CSV values carry 9 significant digits
        assert getattr(again, f) == pytest.approx(getattr(emitted, f), rel=1e-8, abs=1e-12)
    for x, y in zip(again.attacks, emitted.attacks):
        assert (x.kind, x.start_step, x.end_step, x.recovery_steps) == (y.kind, y.start_step, y.end_step, y.recovery_steps)
    assert trace_to_csv(parsed) == path.read_text()


def test_summary_text_is_json(trace):
    import json

    d = json.loads(summary_to_text(summarize(trace)))
    assert d["steps"] == 8 and len(d["attacks"]) == 2


def test_plot_is_standalone_svg(trace, tmp_path):
    text = emit_plot(trace, tmp_path / "t.svg", stride=2).read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert "step 0" in text and "step 2" in text


def test_unwritable_path(trace, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError) as info:
        emit_csv(trace, blocker / "out.csv")
    assert str(blocker) in str(info.value)
