"""Parser for a small OpenQASM 2.0 subset.

Accepted: the ``OPENQASM 2.0;`` header, ``include "qelib1.inc";``, exactly one
``qreg``, any number of ``creg``, the gates listed in :data:`GATE_ARITY`,
``barrier`` and ``measure`` (both ignored for the ideal distribution) and ``//``
comments.  Gate definitions, ``if`` statements, ``reset`` and other includes are
rejected.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass

from shotwise.probdist import MAX_QUBITS

# name -> (number of qubits, number of angle parameters)
GATE_ARITY = {
    "h": (1, 0), "x": (1, 0), "y": (1, 0), "z": (1, 0),
    "s": (1, 0), "sdg": (1, 0), "t": (1, 0), "tdg": (1, 0),
    "rx": (1, 1), "ry": (1, 1), "rz": (1, 1),
    "u1": (1, 1), "u2": (1, 2), "u3": (1, 3),
    "cx": (2, 0), "cz": (2, 0), "swap": (2, 0), "ccx": (3, 0),
}


class QasmError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class UnsupportedGateError(QasmError):
    def __init__(self, gate: str, line: int, column: int):
        self.gate = gate
        super().__init__(f"unsupported gate {gate!r}", line, column)


@dataclass(frozen=True)
class GateOp:
    name: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in GATE_ARITY:
            raise ValueError(f"unsupported gate {self.name!r}")
        nq, npar = GATE_ARITY[self.name]
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.targets) != nq or len(self.params) != npar:
            raise ValueError(f"{self.name} takes {nq} qubit(s) and {npar} parameter(s)")
        if len(set(self.targets)) != nq:
            raise ValueError(f"{self.name}: repeated qubit in {self.targets}")


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: tuple[GateOp, ...] = ()
    label: str = ""

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}]")
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if any(t < 0 or t >= self.num_qubits for t in op.targets):
                raise ValueError(f"{op.name}{op.targets} out of range for {self.num_qubits} qubits")


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
          "ln": math.log, "sqrt": math.sqrt}


def eval_angle(text: str) -> float:
    """Evaluate a QASM parameter expression (numbers, ``pi``, + - * / ^, functions)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"bad parameter expression {text!r}")

    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad parameter expression {text!r}") from exc
    return float(ev(tree))


_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_RE_HEADER = re.compile(r"OPENQASM\s+(\S+)$")
_RE_INCLUDE = re.compile(r'include\s+"([^"]*)"$')
_RE_REG = re.compile(rf"(qreg|creg)\s+({_IDENT})\s*\[\s*(\d+)\s*\]$")
_RE_ARG = re.compile(rf"({_IDENT})\s*(?:\[\s*(\d+)\s*\])?$")
_RE_GATE = re.compile(rf"({_IDENT})\s*(?:\((.*)\))?\s*(.*)$", re.S)


def _statements(text: str):
    """Yield ``(statement, line, column)`` for each ``;``-terminated statement."""
    buf: list[str] = []
    start = None
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "/" and text.startswith("//", i):
            j = text.find("\n", i)
            i = len(text) if j < 0 else j
            continue
        if ch == ";":
            stmt = "".join(buf).strip()
            if not stmt:
                raise QasmError("empty statement", line, col)
            yield stmt, start[0], start[1]
            buf, start = [], None
        else:
            if start is None and not ch.isspace():
                start = (line, col)
            buf.append(ch)
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1
        i += 1
    if "".join(buf).strip():
        raise QasmError("missing ';' at end of statement", start[0], start[1])


def parse_qasm(text: str, max_qubits: int = MAX_QUBITS, label: str = "") -> Circuit:
    qreg: tuple[str, int] | None = None
    cregs: dict[str, int] = {}
    ops: list[GateOp] = []
    seen_header = False

    def qubit_list(arg: str, line: int, col: int) -> list[int]:
        m = _RE_ARG.match(arg.strip())
        if not m:
            raise QasmError(f"malformed argument {arg.strip()!r}", line, col)
        name, idx = m.group(1), m.group(2)
        if qreg is None or name != qreg[0]:
            raise QasmError(f"unknown quantum register {name!r}", line, col)
        if idx is None:
            return list(range(qreg[1]))
        k = int(idx)
        if k >= qreg[1]:
            raise QasmError(f"qubit index {name}[{k}] out of range (size {qreg[1]})", line, col)
        return [k]

    for stmt, line, col in _statements(text):
        head = re.match(r"[A-Za-z_][A-Za-z0-9_]*|\S+", stmt).group(0)
        if not seen_header:
            m = _RE_HEADER.match(stmt)
            if not m:
                raise QasmError("expected 'OPENQASM 2.0;' header", line, col)
            if m.group(1) not in ("2.0", "2"):
                raise QasmError(f"unsupported OpenQASM version {m.group(1)}", line, col)
            seen_header = True
            continue
        if head == "OPENQASM":
            raise QasmError("duplicate header", line, col)
        if head == "include":
            m = _RE_INCLUDE.match(stmt)
            if not m or m.group(1) != "qelib1.inc":
                raise QasmError(f"unsupported include {stmt[7:].strip()}", line, col)
            continue
        if head in ("qreg", "creg"):
            m = _RE_REG.match(stmt)
            if not m:
                raise QasmError(f"malformed {head} declaration", line, col)
            size = int(m.group(3))
            if size < 1:
                raise QasmError(f"register {m.group(2)} must have size >= 1", line, col)
            if head == "creg":
                cregs[m.group(2)] = size
                continue
            if qreg is not None:
                raise QasmError("only one quantum register is supported", line, col)
            if size > max_qubits:
                raise QasmError(f"register size {size} exceeds the cap of {max_qubits} qubits",
                                line, col)
            qreg = (m.group(2), size)
            continue
        if head in ("gate", "opaque", "if", "reset"):
            raise QasmError(f"'{head}' statements are not supported", line, col)
        if head == "measure":
            parts = stmt[len("measure"):].split("->")
            if len(parts) != 2:
                raise QasmError("malformed measure statement", line, col)
            qubit_list(parts[0], line, col)
            m = _RE_ARG.match(parts[1].strip())
            if not m or m.group(1) not in cregs:
                raise QasmError(f"unknown classical register in {parts[1].strip()!r}", line, col)
            continue
        if head == "barrier":
            for arg in stmt[len("barrier"):].split(","):
                qubit_list(arg, line, col)
            continue

        m = _RE_GATE.match(stmt)
        if not m:
            raise QasmError(f"cannot parse statement {stmt!r}", line, col)
        name, ptext, argtext = m.group(1), m.group(2), m.group(3)
        if name not in GATE_ARITY:
            raise UnsupportedGateError(name, line, col)
        if qreg is None:
            raise QasmError("gate used before qreg declaration", line, col)
        nq, npar = GATE_ARITY[name]
        try:
            params = [eval_angle(p) for p in ptext.split(",")] if ptext is not None else []
        except ValueError as exc:
            raise QasmError(str(exc), line, col) from None
        if len(params) != npar:
            raise QasmError(f"{name} expects {npar} parameter(s), got {len(params)}", line, col)
        args = [a for a in argtext.split(",")]
        if len(args) != nq or not all(a.strip() for a in args):
            raise QasmError(f"{name} expects {nq} qubit argument(s)", line, col)
        qubits = [qubit_list(a, line, col) for a in args]
        if nq == 1:
            ops.extend(GateOp(name, (t,), params) for t in qubits[0])
            continue
        if any(len(q) != 1 for q in qubits):
            raise QasmError(f"{name} needs indexed qubits", line, col)
        targets = tuple(q[0] for q in qubits)
        if len(set(targets)) != nq:
            raise QasmError(f"{name} applied to repeated qubit", line, col)
        ops.append(GateOp(name, targets, params))

    if not seen_header:
        raise QasmError("expected 'OPENQASM 2.0;' header", 1, 1)
    if qreg is None:
        raise QasmError("no quantum register declared")
    return Circuit(qreg[1], tuple(ops), label)


def to_qasm(circuit: Circuit) -> str:
    """Render ``circuit`` as OpenQASM 2.0; ``parse_qasm`` reproduces the op list."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.num_qubits}];"]
    for op in circuit.ops:
        params = f"({','.join(repr(p) for p in op.params)})" if op.params else ""
        args = ",".join(f"q[{t}]" for t in op.targets)
        lines.append(f"{op.name}{params} {args};")
    return "\n".join(lines) + "\n"
