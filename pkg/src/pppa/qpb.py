"""Line-oriented plain-text instance format (QPB).

Grammar (one record per line, tokens whitespace-separated)::

    qpb 1
    [family <name>] [seed <int>] [rho <float>] [generator-id <token>]
    [structure dense|tridiagonal]
    n <int>
    q <n reals>
    u <n reals or inf>
    m <nnz>
    <i> <j> <value>     # nnz lines, 1 <= i <= j <= n, lower triangle of M

Values are written with 17 significant digits, so parse(write(x))
round-trips bit-exactly.  Unlisted matrix entries are zero.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import DuplicateEntry, IndexOutOfRange, ParseError
from .matrices import SymMatrix
from .pivoting import QpInstance

_HEADER_KEYS = ("family", "seed", "rho", "generator-id", "structure")


def _fmt(v: float) -> str:
    if np.isposinf(v):
        return "inf"
    return f"{v:.17g}"


def write_qpb(instance: QpInstance, header: dict | None = None) -> str:
    """Serialize an instance; ``header`` may carry the optional keys."""
    out = io.StringIO()
    out.write("qpb 1\n")
    header = header or {}
    for key in _HEADER_KEYS:
        if key in header and key != "structure":
            out.write(f"{key} {header[key]}\n")
    out.write(f"structure {'tridiagonal' if instance.m.tridiagonal else 'dense'}\n")
    n = instance.n
    out.write(f"n {n}\n")
    out.write("q " + " ".join(_fmt(v) for v in instance.q) + "\n")
    out.write("u " + " ".join(_fmt(v) for v in instance.u) + "\n")
    if instance.m.tridiagonal:
        diag, sub = instance.m.band()
        triplets = [(i, i, diag[i]) for i in range(n) if diag[i] != 0.0]
        triplets += [(i, i + 1, sub[i]) for i in range(n - 1) if sub[i] != 0.0]
        triplets.sort()
    else:
        a = instance.m.full()
        rows, cols = np.nonzero(np.triu(a))
        triplets = [(int(i), int(j), a[i, j]) for i, j in zip(rows, cols)]
    out.write(f"m {len(triplets)}\n")
    for i, j, v in triplets:
        out.write(f"{i + 1} {j + 1} {_fmt(v)}\n")
    return out.getvalue()


def _parse_real(token: str, lineno: int) -> float:
    if token == "inf":
        return np.inf
    try:
        return float(token)
    except ValueError as exc:
        raise ParseError(f"expected a real number, got {token!r}", line=lineno) from exc


def parse_qpb(text: str) -> tuple[QpInstance, dict]:
    """Parse QPB text; returns (instance, header dict)."""
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            raw = lines[pos]
            pos += 1
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                return stripped, pos
        return None, pos

    first, lineno = next_line()
    if first is None or first.split() != ["qpb", "1"]:
        raise ParseError(f"expected 'qpb 1' header, got {first!r}", line=lineno)

    header: dict = {}
    n = None
    q = u = None
    nnz = None
    while True:
        line, lineno = next_line()
        if line is None:
            raise ParseError("unexpected end of file before matrix section", line=lineno)
        tokens = line.split()
        key = tokens[0]
        if key in _HEADER_KEYS:
            if len(tokens) != 2:
                raise ParseError(f"header key {key!r} takes one value", line=lineno)
            value: object = tokens[1]
            if key == "seed":
                value = int(tokens[1])
            elif key == "rho":
                value = float(tokens[1])
            header[key] = value
        elif key == "n":
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise ParseError("n takes one integer value", line=lineno)
            n = int(tokens[1])
        elif key in ("q", "u"):
            if n is None:
                raise ParseError(f"{key} section before n", line=lineno)
            vals = [_parse_real(t, lineno) for t in tokens[1:]]
            if len(vals) != n:
                raise ParseError(f"{key} has {len(vals)} values, expected {n}", line=lineno)
            if key == "q":
                q = np.array(vals)
            else:
                u = np.array(vals)
        elif key == "m":
            if n is None or q is None or u is None:
                raise ParseError("m section before n/q/u", line=lineno)
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise ParseError("m takes one integer count", line=lineno)
            nnz = int(tokens[1])
            break
        else:
            raise ParseError(f"unknown record {key!r}", line=lineno)

    a = np.zeros((n, n))
    seen = set()
    max_band = 0
    for _ in range(nnz):
        line, lineno = next_line()
        if line is None:
            raise ParseError(f"expected {nnz} triplets, file ended early", line=lineno)
        tokens = line.split()
        if len(tokens) != 3:
            raise ParseError(f"matrix triplet needs 3 tokens, got {len(tokens)}", line=lineno)
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError as exc:
            raise ParseError(f"bad triplet indices {tokens[:2]}", line=lineno) from exc
        if not (1 <= i <= n and 1 <= j <= n):
            raise IndexOutOfRange(f"triplet index ({i}, {j}) outside 1..{n}", line=lineno)
        if i > j:
            i, j = j, i
        if (i, j) in seen:
            raise DuplicateEntry(f"triplet ({i}, {j}) appears twice", line=lineno)
        seen.add((i, j))
        v = _parse_real(tokens[2], lineno)
        a[i - 1, j - 1] = v
        a[j - 1, i - 1] = v
        max_band = max(max_band, j - i)
    trailing, lineno = next_line()
    if trailing is not None:
        raise ParseError(f"unexpected trailing record {trailing!r}", line=lineno)

    structure = header.get("structure")
    if structure is None:
        tridiagonal = n >= 2 and max_band <= 1
    elif structure == "tridiagonal":
        if max_band > 1:
            raise ParseError("structure tridiagonal but a triplet lies outside the band", line=lineno)
        tridiagonal = True
    elif structure == "dense":
        tridiagonal = False
    else:
        raise ParseError(f"unknown structure {structure!r}", line=lineno)
    if tridiagonal:
        m = SymMatrix.from_banded(np.diagonal(a).copy(),
                                  np.diagonal(a, 1).copy() if n > 1 else np.zeros(0))
    else:
        m = SymMatrix.from_dense(a)
    try:
        instance = QpInstance(m, q, u)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    return instance, header


def load_qpb(path) -> tuple[QpInstance, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_qpb(fh.read())


def save_qpb(path, instance: QpInstance, header: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_qpb(instance, header))
