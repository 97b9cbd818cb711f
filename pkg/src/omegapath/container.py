"""Flat binary container for symbols and operator matrices, plus CSV dumps.

Layout (little-endian):

    magic   4s   b"OMGP"
    version u2
    kind    u1   0 = symbol, 1 = operator
    pad     u1
    stamp   f8   write time, excluded from checksums
    ...          kind-specific header
    data         interleaved (re, im) f8 pairs, row-major

Symbol header: d u4, n_q u4, n_p u4, L_q f8, L_p f8, hbar f8, ordering u1,
domain u1.  Operator header: basis u1 (0 Fock, 1 position), dim u4,
hbar f8, L_x f8.
"""

from __future__ import annotations

import csv
import hashlib
import struct
import time
from pathlib import Path

import numpy as np

from .omega import RULE_NAMES
from .phase_grid import FREQUENCY, PHASE, PhaseGrid, Symbol
from .quantizer import FockBasis, OperatorMatrix, PositionBasis

MAGIC = b"OMGP"
VERSION = 1
_PREFIX = struct.Struct("<4sHBBd")
_SYMBOL = struct.Struct("<IIIdddBB")
_OPERATOR = struct.Struct("<BIdd")
STAMP_SLICE = slice(8, 16)


class ContainerError(ValueError):
    pass


def _data(values: np.ndarray) -> bytes:
    v = np.ascontiguousarray(values, dtype=np.complex128)
    return v.astype("<c16").tobytes()


def encode(obj, stamp: float | None = None) -> bytes:
    stamp = time.time() if stamp is None else stamp
    if isinstance(obj, Symbol):
        g = obj.grid
        head = _PREFIX.pack(MAGIC, VERSION, 0, 0, stamp) + _SYMBOL.pack(
            g.d, g.n_q, g.n_p, g.L_q, g.L_p, g.hbar, RULE_NAMES.index(obj.ordering),
            0 if obj.domain == PHASE else 1)
        return head + _data(obj.values)
    if isinstance(obj, OperatorMatrix):
        if isinstance(obj.basis, FockBasis):
            kind, L = 0, 0.0
        elif isinstance(obj.basis, PositionBasis):
            kind, L = 1, obj.basis.L_x
        else:
            raise ContainerError(f"cannot serialize basis {obj.basis!r}")
        head = _PREFIX.pack(MAGIC, VERSION, 1, 0, stamp) + _OPERATOR.pack(kind, obj.basis.dim, obj.hbar, L)
        return head + _data(obj.entries)
    raise ContainerError(f"cannot serialize {type(obj).__name__}")


def decode(buf: bytes):
    if len(buf) < _PREFIX.size:
        raise ContainerError("truncated header")
    magic, version, kind, _, _stamp = _PREFIX.unpack_from(buf)
    if magic != MAGIC:
        raise ContainerError("not an omegapath container")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    off = _PREFIX.size
    if kind == 0:
        d, n_q, n_p, L_q, L_p, hbar, tag, dom = _SYMBOL.unpack_from(buf, off)
        grid = PhaseGrid(n_q, n_p, L_q, L_p, hbar, d)
        domain = PHASE if dom == 0 else FREQUENCY
        shape = grid.shape if domain == PHASE else grid.frequency_shape
        values = _values(buf, off + _SYMBOL.size, shape)
        return Symbol(grid, values, ordering=RULE_NAMES[tag], domain=domain)
    if kind == 1:
        bkind, dim, hbar, L = _OPERATOR.unpack_from(buf, off)
        basis = FockBasis(dim) if bkind == 0 else PositionBasis(dim, L)
        return OperatorMatrix(basis, _values(buf, off + _OPERATOR.size, (dim, dim)), hbar)
    raise ContainerError(f"unknown container kind {kind}")


def _values(buf: bytes, off: int, shape) -> np.ndarray:
    count = int(np.prod(shape))
    if len(buf) - off != 16 * count:
        raise ContainerError(f"payload holds {(len(buf) - off) / 16:g} values, header promises {count}")
    return np.frombuffer(buf, dtype="<c16", offset=off).reshape(shape).astype(complex)


def save(obj, path, stamp: float | None = None) -> Path:
    path = Path(path)
    path.write_bytes(encode(obj, stamp))
    return path


def load(path):
    return decode(Path(path).read_bytes())


def checksum(path) -> str:
    """sha256 of the file; binary containers hash with their timestamp zeroed."""
    buf = bytearray(Path(path).read_bytes())
    if buf[:4] == MAGIC and len(buf) >= _PREFIX.size:
        buf[STAMP_SLICE] = bytes(8)
    return hashlib.sha256(bytes(buf)).hexdigest()


def describe(obj, max_entries: int = 6) -> str:
    """Human-readable summary of a decoded container."""
    lines = []
    if isinstance(obj, Symbol):
        g = obj.grid
        lines.append(f"symbol  ordering={obj.ordering}  domain={obj.domain}")
        lines.append(f"grid    d={g.d} n_q={g.n_q} n_p={g.n_p} L_q={g.L_q:.17g} L_p={g.L_p:.17g} hbar={g.hbar:.17g}")
        vals = obj.values
    else:
        name = type(obj.basis).__name__
        lines.append(f"operator  basis={name} dim={obj.basis.dim} hbar={obj.hbar:.17g}")
        vals = obj.entries
    lines.append(f"shape   {vals.shape}  max|v|={np.abs(vals).max():.17g}")
    flat = vals.ravel()
    for k in range(min(max_entries, flat.size)):
        idx = tuple(int(i) for i in np.unravel_index(k, vals.shape))
        lines.append(f"  {idx}: {flat[k].real:.17g} {flat[k].imag:+.17g}j")
    if flat.size > max_entries:
        lines.append(f"  ... {flat.size - max_entries} more")
    return "\n".join(lines)


def write_symbol_csv(f: Symbol, path) -> None:
    """Plot-ready dump: q, p, re, im per phase cell (one degree of freedom)."""
    if f.domain != PHASE or f.grid.d != 1:
        raise ContainerError("CSV dump supports phase-domain symbols with d = 1")
    q, p = f.grid.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "p", "value_re", "value_im"])
        for a, b, v in zip(q.ravel(), p.ravel(), f.values.ravel()):
            w.writerow(["%.17g" % a, "%.17g" % b, "%.17g" % v.real, "%.17g" % v.imag])
