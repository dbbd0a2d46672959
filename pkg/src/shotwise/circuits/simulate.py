"""Statevector evaluation of :class:`Circuit` objects.

The state of ``q`` qubits is kept as a tensor of shape ``(2,)*q`` whose axis
``k`` is qubit ``k``; flattening in C order gives the big-endian outcome index.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from shotwise.circuits.qasm import Circuit, GateOp
from shotwise.probdist import ProbDist

_S2 = 1 / math.sqrt(2)

FIXED_1Q = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "t": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex),
    "tdg": np.array([[1, 0], [0, cmath.exp(-1j * math.pi / 4)]], dtype=complex),
}


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -cmath.exp(1j * lam) * s],
                     [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c]])


def gate_matrix(op: GateOp) -> np.ndarray:
    """2x2 matrix of a single-qubit gate (OpenQASM 2 conventions)."""
    if op.name in FIXED_1Q:
        return FIXED_1Q[op.name]
    p = op.params
    if op.name == "rx":
        c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if op.name == "ry":
        c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if op.name == "rz":
        return np.array([[cmath.exp(-0.5j * p[0]), 0], [0, cmath.exp(0.5j * p[0])]])
    if op.name == "u1":
        return np.array([[1, 0], [0, cmath.exp(1j * p[0])]])
    if op.name == "u2":
        return u3_matrix(math.pi / 2, p[0], p[1])
    if op.name == "u3":
        return u3_matrix(*p)
    raise ValueError(f"{op.name} is not a single-qubit gate")


def _sel(n: int, fixed: dict[int, int]):
    idx = [slice(None)] * n
    for axis, val in fixed.items():
        idx[axis] = val
    return tuple(idx)


def apply_gate(psi: np.ndarray, op: GateOp) -> np.ndarray:
    """Apply ``op`` to a ``(2,)*n`` state tensor, returning a new tensor."""
    n = psi.ndim
    t = op.targets
    if len(t) == 1:
        out = np.tensordot(gate_matrix(op), psi, axes=([1], [t[0]]))
        return np.moveaxis(out, 0, t[0])
    out = psi.copy()
    if op.name == "cx":
        out[_sel(n, {t[0]: 1, t[1]: 0})] = psi[_sel(n, {t[0]: 1, t[1]: 1})]
        out[_sel(n, {t[0]: 1, t[1]: 1})] = psi[_sel(n, {t[0]: 1, t[1]: 0})]
    elif op.name == "cz":
        out[_sel(n, {t[0]: 1, t[1]: 1})] *= -1
    elif op.name == "swap":
        out[_sel(n, {t[0]: 0, t[1]: 1})] = psi[_sel(n, {t[0]: 1, t[1]: 0})]
        out[_sel(n, {t[0]: 1, t[1]: 0})] = psi[_sel(n, {t[0]: 0, t[1]: 1})]
    elif op.name == "ccx":
        out[_sel(n, {t[0]: 1, t[1]: 1, t[2]: 0})] = psi[_sel(n, {t[0]: 1, t[1]: 1, t[2]: 1})]
        out[_sel(n, {t[0]: 1, t[1]: 1, t[2]: 1})] = psi[_sel(n, {t[0]: 1, t[1]: 1, t[2]: 0})]
    else:
        raise ValueError(f"unknown gate {op.name!r}")
    return out


def statevector(circuit: Circuit) -> np.ndarray:
    n = circuit.num_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for op in circuit.ops:
        psi = apply_gate(psi, op)
    return psi.reshape(-1)


def _distribution(amplitudes: np.ndarray, num_qubits: int) -> ProbDist:
    p = np.abs(amplitudes) ** 2
    return ProbDist(num_qubits, p / p.sum())


def ideal_distribution(circuit: Circuit) -> ProbDist:
    return _distribution(statevector(circuit), circuit.num_qubits)


def ideal_distribution_from_unitary(u: np.ndarray) -> ProbDist:
    """Outcome probabilities ``|<x|U|0>|^2``: squared moduli of the first column."""
    u = np.asarray(u)
    dim = u.shape[0]
    q = dim.bit_length() - 1
    if u.shape != (dim, dim) or dim != 1 << q or q < 1:
        raise ValueError("expected a 2^q x 2^q matrix")
    return _distribution(u[:, 0], q)
