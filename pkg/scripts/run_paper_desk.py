"""Run the built-in seven-backend experiment grid and print the mean distance
per subset size for each split/merge pair next to the single-backend baseline."""

import argparse
from pathlib import Path

from shotwise.harness import ExperimentConfig, aggregate, emit, run_grid
from shotwise.presets import PAPER_DESK


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repetitions", type=int, default=PAPER_DESK["repetitions"])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None, help="directory for rows.csv and aggregates.csv")
    args = ap.parse_args()

    cfg = ExperimentConfig.from_dict({**PAPER_DESK, "repetitions": args.repetitions})
    rows = run_grid(cfg, jobs=args.jobs)
    aggs = [a for a in aggregate(rows, per_circuit=False) if a.circuit == "ALL"]
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        emit(rows, args.out / "rows.csv")
        emit(aggs, args.out / "aggregates.csv")

    base = next(a for a in aggs if a.merge == "baseline")
    print(f"baseline: mean {base.mean:.4f}  max {base.max:.4f}  std {base.std:.4f}")
    pairs = sorted({(a.split, a.merge) for a in aggs if a.merge != "baseline"})
    sizes = sorted({a.subset_size for a in aggs if a.merge != "baseline"})
    print(f"{'split/merge':<22}" + "".join(f"{'N=' + str(n):>9}" for n in sizes))
    for s, m in pairs:
        means = {a.subset_size: a.mean for a in aggs if (a.split, a.merge) == (s, m)}
        print(f"{s + '/' + m:<22}" + "".join(f"{means[n]:>9.4f}" for n in sizes))


if __name__ == "__main__":
    main()
