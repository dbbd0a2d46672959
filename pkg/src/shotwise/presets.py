"""Built-in fleet and experiment presets.

The standard fleet mimics the spread of a mixed provider pool: four low-noise
devices whose calibration unreliability sits around 1e-3..1e-2 and three
high-noise devices around 5e-2, each with its own random bias direction.
"""

from __future__ import annotations

STANDARD_FLEET = [
    {"id": "low_a", "lambda": 0.02, "bias": "random", "bias_seed": 101, "eta": 0.003, "seed": 11},
    {"id": "low_b", "lambda": 0.03, "bias": "random", "bias_seed": 102, "eta": 0.005, "seed": 12},
    {"id": "low_c", "lambda": 0.08, "bias": "random", "bias_seed": 103, "eta": 0.02, "seed": 13},
    {"id": "low_d", "lambda": 0.10, "bias": "random", "bias_seed": 104, "eta": 0.015, "seed": 14},
    {"id": "high_a", "lambda": 0.48, "bias": "random", "bias_seed": 105, "eta": 0.05, "seed": 15},
    {"id": "high_b", "lambda": 0.47, "bias": "random", "bias_seed": 106, "eta": 0.05, "seed": 16},
    {"id": "high_c", "lambda": 0.42, "bias": "random", "bias_seed": 107, "eta": 0.04, "seed": 17},
]

CALIBRATION_BENCHMARKS = [{"kind": "haar", "qubits": 5, "seed": s} for s in range(10)]

PAPER_DESK = {
    "fleet": STANDARD_FLEET,
    "calibration": {"benchmarks": CALIBRATION_BENCHMARKS, "shots": 1000},
    "targets": [
        {"kind": "ghz", "qubits": 5},
        {"kind": "ghz", "qubits": 8},
        {"kind": "haar", "qubits": 5, "seed": 1000},
    ],
    "subset_sizes": [2, 3, 4, 5, 6, 7],
    "policies": [[s, m] for s in ("uniform", "hellinger", "mise")
                 for m in ("uniform", "hellinger", "mise")],
    "repetitions": 5,
    "base_seed": 2024,
    "budget": 4096,
}

PROTOCOL_EXAMPLE = {
    "fleet": STANDARD_FLEET,
    "calibration": {"benchmarks": CALIBRATION_BENCHMARKS, "shots": 1000},
    "production": {
        "target": {"kind": "ghz", "qubits": 5},
        "budget": 4096,
        "iterations": 1,
        "policy": {"split": "mise", "merge": "mise", "epsilon": 0.001, "gamma": 1.0},
        "stop": {"kind": "budget_exhausted"},
    },
    "seed": 0,
}

PRESETS = {"paper-desk": PAPER_DESK, "protocol-example": PROTOCOL_EXAMPLE}
