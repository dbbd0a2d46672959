"""Calibrate the standard fleet for a few seeds and show how stable the
unreliability ranking and the MISE weights are."""

import argparse

from shotwise.backends import fleet_from_config, reseed_fleet
from shotwise.orchestrator import CalibrationConfig, run_calibration
from shotwise.presets import CALIBRATION_BENCHMARKS, STANDARD_FLEET


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--shots", type=int, default=1000)
    args = ap.parse_args()

    fleet = fleet_from_config(STANDARD_FLEET)
    cfg = CalibrationConfig.from_dict({"benchmarks": CALIBRATION_BENCHMARKS, "shots": args.shots})
    for seed in range(args.seeds):
        rep = run_calibration(reseed_fleet(fleet, seed), cfg)
        u = rep.unreliability
        w = rep.mise.weight_map()
        print(f"seed {seed}: " + "  ".join(f"{q}:u={u[q]:.4f},w={w[q]:.2f}" for q in rep.ranking))


if __name__ == "__main__":
    main()
