"""Run the bundled scenarios, write CSV/summary/SVG outputs and print a digest.

    python3 scripts/run_reference.py [--out results]
"""
import argparse
from pathlib import Path

from mosaic.output import emit_csv, emit_plot, emit_summary
from mosaic.scenario import load_scenario
from mosaic.sim import run_and_summarize

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for path in sorted((ROOT / "scenarios").glob("*.json")):
        cfg = load_scenario(path)
        trace, summary = run_and_summarize(cfg)
        stem = args.out / cfg.name
        emit_csv(trace, stem.with_suffix(".csv"))
        emit_summary(summary, stem.with_suffix(".summary.json"))
        emit_plot(trace, stem.with_suffix(".svg"))
        print(f"{cfg.name:14s} mode={cfg.mode:8s} min={summary.min_lambda2:.4g} "
              f"final={summary.final_lambda2:.4g} disconnected={summary.steps_disconnected}")
        for a in summary.attacks:
            print(f"  {a.kind} [{a.start_step}, {a.end_step}) recovery={a.recovery_steps}")

    # the jamming scenario again, planned without anticipating the jammer
    cfg = load_scenario(ROOT / "scenarios" / "jamming.json").with_overrides(mode="nominal")
    _, nominal = run_and_summarize(cfg)
    print(f"jamming contrast: nominal planning min={nominal.min_lambda2:.4g} "
          f"disconnected={nominal.steps_disconnected}")


if __name__ == "__main__":
    main()
