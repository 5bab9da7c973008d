"""OpenQASM 2.0 subset: parsing into :class:`Circuit` and exporting back."""

from __future__ import annotations

import ast
import math
import operator
import re
import warnings


from .circuit import Circuit, Gate
from .errors import DomainError, ParseError, UnsupportedGateError

# name -> (parameter count, qubit count)
_SIGNATURES = {
    "h": (0, 1), "x": (0, 1), "y": (0, 1), "z": (0, 1),
    "s": (0, 1), "sdg": (0, 1), "t": (0, 1), "tdg": (0, 1),
    "rx": (1, 1), "ry": (1, 1), "rz": (1, 1), "p": (1, 1), "u1": (1, 1),
    "u2": (2, 1), "u3": (3, 1), "u": (3, 1),
    "cx": (0, 2), "CX": (0, 2), "cz": (0, 2), "cp": (1, 2), "cu1": (1, 2),
    "ccx": (0, 3), "swap": (0, 2),
}
_SIMPLE = {"h": "H", "x": "X", "y": "Y", "z": "Z", "s": "S", "sdg": "Sdg", "t": "T", "tdg": "Tdg"}
_IGNORED = ("measure", "barrier", "reset")

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt}


def _eval_param(text: str, line: int) -> float:
    """Evaluate an angle expression built from numbers, ``pi`` and + - * / ^."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ParseError(line, f"bad parameter expression {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ParseError(line, f"unsupported token in parameter expression {text!r}")

    try:
        return ev(tree)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise ParseError(line, f"cannot evaluate {text!r}: {exc}") from exc


def _statements(text: str):
    """Yield ``(line_number, statement)`` with comments stripped."""
    buf = []
    start = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        for ch in line:
            if start is None and not ch.isspace():
                start = lineno
            if ch == ";":
                stmt = "".join(buf).strip()
                if stmt:
                    yield start, stmt
                buf = []
                start = None
            else:
                buf.append(ch)
        buf.append(" ")
    rest = "".join(buf).strip()
    if rest:
        raise ParseError(start or 0, f"missing ';' after {rest!r}")


_GATE_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*(.*)$", re.S)
_ARG_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\[\s*(\d+)\s*\])?$")


def _split_params(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_qasm(text: str, name: str = "qasm") -> Circuit:
    """Parse the supported OpenQASM 2.0 subset.

    Multiple quantum registers are concatenated in declaration order.
    ``measure``, ``barrier`` and ``reset`` are skipped with a warning; ``creg``
    declarations are ignored.
    """
    registers: dict[str, tuple[int, int]] = {}
    n = 0
    ops: list[tuple[int, str, list[float], list[int]]] = []
    skipped = []
    saw_header = False
    for line, stmt in _statements(text):
        if stmt.startswith("OPENQASM"):
            if not re.fullmatch(r"OPENQASM\s+2(\.0)?", stmt):
                raise ParseError(line, f"unsupported version: {stmt!r}")
            saw_header = True
            continue
        if stmt.startswith("include"):
            continue
        head = stmt.split(None, 1)[0].split("(", 1)[0].split("[", 1)[0]
        if head in ("qreg", "creg"):
            m = re.fullmatch(r"(qreg|creg)\s+([A-Za-z_][A-Za-z0-9_]*)\s*\[\s*(\d+)\s*\]", stmt)
            if not m:
                raise ParseError(line, f"malformed register declaration {stmt!r}")
            if head == "qreg":
                reg, size = m.group(2), int(m.group(3))
                if reg in registers:
                    raise ParseError(line, f"register {reg!r} declared twice")
                registers[reg] = (n, size)
                n += size
            continue
        if head in _IGNORED:
            skipped.append(head)
            continue
        if head in ("gate", "opaque", "if"):
            raise UnsupportedGateError(head, line)
        m = _GATE_RE.match(stmt)
        if not m:
            raise ParseError(line, f"cannot parse statement {stmt!r}")
        gname, ptext, atext = m.group(1), m.group(2), m.group(3)
        if gname not in _SIGNATURES:
            raise UnsupportedGateError(gname, line)
        nparams, nqubits = _SIGNATURES[gname]
        params = [_eval_param(p, line) for p in _split_params(ptext)] if ptext and ptext.strip() else []
        if len(params) != nparams:
            raise ParseError(line, f"{gname} takes {nparams} parameter(s), got {len(params)}")
        args = [a.strip() for a in atext.split(",")] if atext.strip() else []
        if len(args) != nqubits:
            raise ParseError(line, f"{gname} takes {nqubits} qubit(s), got {len(args)}")
        resolved = []
        for a in args:
            am = _ARG_RE.match(a)
            if not am:
                raise ParseError(line, f"bad qubit argument {a!r}")
            reg, idx = am.group(1), am.group(2)
            if reg not in registers:
                raise ParseError(line, f"unknown register {reg!r}")
            offset, size = registers[reg]
            if idx is None:
                if size != 1:
                    raise UnsupportedGateError(f"{gname} (register broadcast)", line)
                idx = 0
            idx = int(idx)
            if idx >= size:
                raise ParseError(line, f"index {idx} out of range for {reg}[{size}]")
            resolved.append(offset + idx)
        if len(set(resolved)) != len(resolved):
            raise ParseError(line, f"{gname} repeats a qubit")
        ops.append((line, gname, params, resolved))
    if not saw_header and ops:
        warnings.warn("QASM input has no OPENQASM header", stacklevel=2)
    if skipped:
        warnings.warn(f"ignored {len(skipped)} measure/barrier/reset statement(s)", stacklevel=2)
    if n == 0:
        raise ParseError(0, "no quantum register declared")
    gates = [_make_gate(gname, params, qs) for _, gname, params, qs in ops]
    return Circuit(n, tuple(gates), name)


def _make_gate(gname: str, params: list[float], qs: list[int]) -> Gate:
    if gname in _SIMPLE:
        return Gate(_SIMPLE[gname], (qs[0],))
    if gname in ("rx", "ry", "rz"):
        return Gate(gname.upper(), (qs[0],), (), tuple(params))
    if gname in ("p", "u1"):
        return Gate("Phase", (qs[0],), (), tuple(params))
    if gname == "u2":
        return Gate("U3", (qs[0],), (), (math.pi / 2, params[0], params[1]))
    if gname in ("u3", "u"):
        return Gate("U3", (qs[0],), (), tuple(params))
    if gname in ("cx", "CX"):
        return Gate("X", (qs[1],), (qs[0],))
    if gname == "cz":
        return Gate("Z", (qs[1],), (qs[0],))
    if gname in ("cp", "cu1"):
        return Gate("Phase", (qs[1],), (qs[0],), tuple(params))
    if gname == "ccx":
        return Gate("X", (qs[2],), (qs[0], qs[1]))
    return Gate("SWAP", (qs[0], qs[1]))


# -- export -------------------------------------------------------------------------

_EXPORT_1Q = {"H": "h", "X": "x", "Y": "y", "Z": "z", "S": "s", "Sdg": "sdg", "T": "t", "Tdg": "tdg"}


def _num(x: float) -> str:
    return repr(float(x))


def _q(i: int) -> str:
    return f"q[{i}]"


def _multi_controlled_phase(theta: float, qubits: list[int]) -> list[str]:
    """``exp(i theta)`` on the all-ones pattern of ``qubits``, from cx and p only.

    Uses ``prod_k x_k = 2^{1-m} sum_{S nonempty} (-1)^{|S|-1} XOR_{k in S} x_k``;
    the parity of each subset is computed onto its last qubit with a CNOT ladder.
    """
    m = len(qubits)
    if m == 1:
        return [f"p({_num(theta)}) {_q(qubits[0])};"]
    out = []
    scale = theta / 2 ** (m - 1)
    for mask in range(1, 1 << m):
        members = [qubits[k] for k in range(m) if (mask >> k) & 1]
        angle = scale * (1 if len(members) % 2 else -1)
        tgt = members[-1]
        ladder = [f"cx {_q(c)},{_q(tgt)};" for c in members[:-1]]
        out += ladder
        out.append(f"p({_num(angle)}) {_q(tgt)};")
        out += ladder[::-1]
    return out


def _diagonal_lines(g: Gate) -> list[str]:
    """Exact decomposition of a DiagonalPhase into X conjugations and multi-controlled phases."""
    table = g.angle_table()
    k = len(g.targets)
    if isinstance(g.func, dict) or hasattr(g.func, "items"):
        entries = [(int(i), float(a)) for i, a in g.func.items()]
    else:
        entries = [(i, float(a)) for i, a in enumerate(table)]
    out = []
    for idx, ang in entries:
        ang = math.remainder(ang, 2 * math.pi)
        if ang == 0:
            continue
        zeros = [g.targets[b] for b in range(k) if not (idx >> b) & 1]
        flips = [f"x {_q(q)};" for q in zeros]
        out += flips
        out += _multi_controlled_phase(ang, list(g.targets))
        out += flips
    return out


def to_qasm(c: Circuit) -> str:
    """Emit OpenQASM 2.0; semantic diagonal gates are decomposed, permutations are rejected."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.n}];"]
    for g in c.gates:
        k = g.kind
        ctrl = g.controls
        if k == "DiagonalPhase":
            lines += _diagonal_lines(g)
            continue
        if k == "PermutationMap":
            raise DomainError("PermutationMap gates have no QASM export")
        if k == "SWAP":
            if ctrl:
                raise DomainError("controlled SWAP has no QASM export")
            lines.append(f"swap {_q(g.targets[0])},{_q(g.targets[1])};")
            continue
        t = g.targets[0]
        if not ctrl:
            if k in _EXPORT_1Q:
                lines.append(f"{_EXPORT_1Q[k]} {_q(t)};")
            elif k in ("RX", "RY", "RZ"):
                lines.append(f"{k.lower()}({_num(g.params[0])}) {_q(t)};")
            elif k == "Phase":
                lines.append(f"p({_num(g.params[0])}) {_q(t)};")
            else:
                lines.append(f"u3({', '.join(_num(p) for p in g.params)}) {_q(t)};")
            continue
        if len(ctrl) == 1 and k == "X":
            lines.append(f"cx {_q(ctrl[0])},{_q(t)};")
        elif len(ctrl) == 1 and k == "Z":
            lines.append(f"cz {_q(ctrl[0])},{_q(t)};")
        elif len(ctrl) == 1 and k == "Phase":
            lines.append(f"cp({_num(g.params[0])}) {_q(ctrl[0])},{_q(t)};")
        elif len(ctrl) == 2 and k == "X":
            lines.append(f"ccx {_q(ctrl[0])},{_q(ctrl[1])},{_q(t)};")
        else:
            raise DomainError(f"no QASM export for {g!r}")
    return "\n".join(lines) + "\n"
