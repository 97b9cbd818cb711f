"""Symbol <-> operator maps in truncated bases.

Ladder convention: ``z+^ = sqrt(hbar) a^dagger`` and ``z-^ = sqrt(hbar) a`` so that
``[z-^, z+^] = hbar`` and normal order puts ``z+^`` on the left.  With
``q^ = (z+^ + z-^)/sqrt2`` and ``p^ = i (z+^ - z-^)/sqrt2`` one has
``[q^, p^] = i hbar``; the creation operator is therefore the quantization of
the classical variable ``(q - i p)/sqrt2``.

Fock matrices are compressions of the true operators to the first ``N``
levels; products of compressions differ from compressions of products only in
the trailing rows and columns, so comparisons use :func:`interior`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial, lgamma, sqrt

import numpy as np
from scipy.special import roots_laguerre

from .phase_grid import (
    PHASE,
    AliasingError,
    PhaseGrid,
    Symbol,
    check_window,
    inverse_symplectic_fourier,
    symplectic_fourier,
)
from .polynomial import DEFAULT_DEGREE_CAP, PolySymbol, convert_poly

RULE_NAMES = ("weyl", "standard", "antistandard", "normal", "antinormal", "symmetric", "born-jordan")


class TruncationError(ValueError):
    """Raised when an operator is not contained in the truncated basis."""


@dataclass(frozen=True)
class FockBasis:
    N: int = 64

    @property
    def dim(self) -> int:
        return self.N


@dataclass(frozen=True)
class PositionBasis:
    n_x: int = 256
    L_x: float = 8.0

    @property
    def dim(self) -> int:
        return self.n_x

    @property
    def dx(self) -> float:
        return 2.0 * self.L_x / self.n_x

    @property
    def x(self) -> np.ndarray:
        return self.dx * (np.arange(self.n_x) - self.n_x // 2)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    basis: object
    entries: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator matrix must be square, got {a.shape}")
        if a.shape[0] != self.basis.dim:
            raise ValueError(f"matrix size {a.shape[0]} does not match basis dimension {self.basis.dim}")
        if a.shape[0] < 8:
            raise ValueError("truncation must keep at least 8 basis states")
        object.__setattr__(self, "entries", a)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_space(self, other)
        return OperatorMatrix(self.basis, self.entries @ other.entries, self.hbar)

    def __add__(self, other):
        if isinstance(other, OperatorMatrix):
            _same_space(self, other)
            return OperatorMatrix(self.basis, self.entries + other.entries, self.hbar)
        return OperatorMatrix(self.basis, self.entries + other * np.eye(self.basis.dim), self.hbar)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return OperatorMatrix(self.basis, self.entries * scalar, self.hbar)

    __rmul__ = __mul__

    @property
    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.entries.conj().T, self.hbar)


def _same_space(a: OperatorMatrix, b: OperatorMatrix):
    if a.basis != b.basis or a.hbar != b.hbar:
        raise ValueError("operators live in different truncated spaces")


def interior(a, cut: int) -> np.ndarray:
    """Upper-left ``(N - cut) x (N - cut)`` block of a Fock matrix."""
    m = a.entries if isinstance(a, OperatorMatrix) else np.asarray(a)
    n = m.shape[0] - cut
    return m[:n, :n]


def interior_error(a, b, cut: int) -> float:
    """Frobenius norm of the difference on the interior block."""
    return float(np.linalg.norm(interior(a, cut) - interior(b, cut)))


# ladder and canonical operators


def annihilation(N: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)


def zminus_op(basis, hbar: float) -> OperatorMatrix:
    if isinstance(basis, FockBasis):
        return OperatorMatrix(basis, np.sqrt(hbar) * annihilation(basis.N), hbar)
    q, p = position_op(basis, hbar), momentum_op(basis, hbar)
    return OperatorMatrix(basis, (q.entries + 1j * p.entries) / np.sqrt(2), hbar)


def zplus_op(basis, hbar: float) -> OperatorMatrix:
    if isinstance(basis, FockBasis):
        return OperatorMatrix(basis, np.sqrt(hbar) * annihilation(basis.N).T, hbar)
    q, p = position_op(basis, hbar), momentum_op(basis, hbar)
    return OperatorMatrix(basis, (q.entries - 1j * p.entries) / np.sqrt(2), hbar)


def position_op(basis, hbar: float) -> OperatorMatrix:
    if isinstance(basis, FockBasis):
        a = annihilation(basis.N)
        return OperatorMatrix(basis, np.sqrt(hbar / 2) * (a + a.T), hbar)
    return OperatorMatrix(basis, np.diag(basis.x).astype(complex), hbar)


def momentum_op(basis, hbar: float) -> OperatorMatrix:
    if isinstance(basis, FockBasis):
        a = annihilation(basis.N)
        return OperatorMatrix(basis, 1j * np.sqrt(hbar / 2) * (a.T - a), hbar)
    n = basis.n_x
    F = np.fft.fft(np.eye(n), axis=0)
    P = np.fft.ifft(hbar * basis.k[:, None] * F, axis=0)
    P = 0.5 * (P + P.conj().T)
    return OperatorMatrix(basis, P, hbar)


def identity_op(basis, hbar: float) -> OperatorMatrix:
    return OperatorMatrix(basis, np.eye(basis.dim, dtype=complex), hbar)


# monomials and the ordering table


@dataclass(frozen=True)
class MonomialOp:
    """``q^n p^m`` (kind "qp") or ``c^n cbar^m`` (kind "ladder", c = (q - i p)/sqrt2)."""

    n: int
    m: int
    kind: str = "qp"
    cap: int = DEFAULT_DEGREE_CAP

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise ValueError("exponents must be non-negative")
        if self.kind not in ("qp", "ladder"):
            raise ValueError(f"unknown monomial kind {self.kind!r}")
        if self.n + self.m > self.cap:
            raise ValueError(f"degree {self.n + self.m} exceeds cap {self.cap}")

    @property
    def degree(self) -> int:
        return self.n + self.m

    def as_poly(self, hbar: float = 1.0, ordering: str = "weyl") -> PolySymbol:
        if self.kind == "qp":
            return PolySymbol.monomial(self.n, self.m, hbar, ordering)
        w = np.zeros((self.n + 1, self.m + 1), dtype=complex)
        w[self.n, self.m] = 1.0
        return PolySymbol.from_ladder(w, hbar, ordering)


def _mpow(a: np.ndarray, k: int) -> np.ndarray:
    return np.linalg.matrix_power(a, k)


def _ladder_sum(w: np.ndarray, Zp: np.ndarray, Zm: np.ndarray, antinormal: bool) -> np.ndarray:
    out = np.zeros_like(Zp)
    for a, b in np.argwhere(np.abs(w) > 1e-15):
        if antinormal:
            out += w[a, b] * _mpow(Zm, b) @ _mpow(Zp, a)
        else:
            out += w[a, b] * _mpow(Zp, a) @ _mpow(Zm, b)
    return out


def _qp_row(n: int, m: int, rule: str, Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    if rule == "weyl":
        return sum(comb(n, j) * _mpow(Q, n - j) @ _mpow(P, m) @ _mpow(Q, j) for j in range(n + 1)) / 2**n
    if rule == "standard":
        return _mpow(Q, n) @ _mpow(P, m)
    if rule == "antistandard":
        return _mpow(P, m) @ _mpow(Q, n)
    if rule == "symmetric":
        return 0.5 * (_mpow(Q, n) @ _mpow(P, m) + _mpow(P, m) @ _mpow(Q, n))
    if rule == "born-jordan":
        return sum(_mpow(P, m - j) @ _mpow(Q, n) @ _mpow(P, j) for j in range(m + 1)) / (m + 1)
    raise KeyError(rule)


def quantize_monomial(mono: MonomialOp, rule: str, basis, hbar: float = 1.0) -> OperatorMatrix:
    """Finite operator sum prescribed by the ordering-table row for ``rule``.

    Normal and antinormal rows act on the ladder expansion of the monomial;
    the other rows act on ``q^n p^m`` (ladder monomials are first expanded in
    q and p).
    """
    if rule not in RULE_NAMES:
        raise KeyError(f"unknown ordering rule {rule!r}")
    if isinstance(basis, FockBasis) and basis.N < 4 + mono.degree:
        raise TruncationError(f"Fock truncation {basis.N} too small for degree {mono.degree}")
    Q = position_op(basis, hbar).entries
    P = momentum_op(basis, hbar).entries
    if rule in ("normal", "antinormal"):
        Zp = zplus_op(basis, hbar).entries
        Zm = zminus_op(basis, hbar).entries
        w = mono.as_poly(hbar).to_ladder()
        return OperatorMatrix(basis, _ladder_sum(w, Zp, Zm, rule == "antinormal"), hbar)
    poly = mono.as_poly(hbar)
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for n, m in np.argwhere(np.abs(poly.coeffs) > 1e-15):
        out += poly.coeffs[n, m] * _qp_row(int(n), int(m), rule, Q, P)
    return OperatorMatrix(basis, out, hbar)


def quantize_poly(f: PolySymbol, basis) -> OperatorMatrix:
    """Quantize a polynomial symbol in its own ordering, monomial by monomial."""
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    cap = max(f.degree, DEFAULT_DEGREE_CAP)
    for n, m in np.argwhere(np.abs(f.coeffs) > 0):
        mono = MonomialOp(int(n), int(m), cap=cap)
        out += f.coeffs[n, m] * quantize_monomial(mono, f.ordering, basis, f.hbar).entries
    return OperatorMatrix(basis, out, f.hbar)


# symbolic CCR reduction (independent oracle for the table rows)


def _normal_times_letter(terms: dict, letter: str) -> dict:
    """Right-multiply a normal-ordered polynomial in a^dagger, a by one letter."""
    out: dict = {}
    for (k, l), c in terms.items():
        if letter == "a":
            out[(k, l + 1)] = out.get((k, l + 1), 0) + c
        else:  # a^dagger: a^l a^dagger = a^dagger a^l + l a^(l-1)
            out[(k + 1, l)] = out.get((k + 1, l), 0) + c
            if l:
                out[(k, l - 1)] = out.get((k, l - 1), 0) + l * c
    return out


def ccr_normal_form(word: str, hbar: float = 1.0) -> dict:
    """Normal-ordered expansion ``{(k, l): c}`` of ``sum c (a^dagger)^k a^l`` for a word.

    Letters: ``q``, ``p`` (canonical), ``A`` (a^dagger), ``a``.  Reduction uses
    only ``[a, a^dagger] = 1`` with ``q = sqrt(hbar/2)(a + a^dagger)`` and
    ``p = i sqrt(hbar/2)(a^dagger - a)``.
    """
    s = np.sqrt(hbar / 2)
    expansions = {
        "q": [("a", s), ("A", s)],
        "p": [("A", 1j * s), ("a", -1j * s)],
        "A": [("A", 1.0)],
        "a": [("a", 1.0)],
    }
    terms = {(0, 0): 1.0 + 0j}
    for letter in word:
        acc: dict = {}
        for sub, coeff in expansions[letter]:
            for key, c in _normal_times_letter(terms, sub).items():
                acc[key] = acc.get(key, 0) + coeff * c
        terms = {k: v for k, v in acc.items() if v != 0}
    return terms


def normal_form_matrix(terms: dict, N: int) -> np.ndarray:
    """Exact compression of ``sum c (a^dagger)^k a^l`` to the first N levels."""
    out = np.zeros((N, N), dtype=complex)
    for (k, l), c in terms.items():
        for col in range(l, N):
            row = col - l + k
            if row >= N:
                continue
            # integer falling factorials keep the oracle at correctly rounded precision
            prod = _falling(col, l) * _falling(row, k)
            out[row, col] += c * sqrt(prod)
    return out


def _falling(n: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= n - j
    return out


def _add_terms(acc: dict, terms: dict, scale: complex):
    for k, v in terms.items():
        acc[k] = acc.get(k, 0) + scale * v


def table_row_oracle(mono: MonomialOp, rule: str, hbar: float = 1.0) -> dict:
    """Normal-ordered form of the table row for ``mono`` by symbolic CCR reduction."""
    acc: dict = {}
    if rule in ("normal", "antinormal"):
        w = mono.as_poly(hbar).to_ladder()
        for a, b in np.argwhere(np.abs(w) > 1e-15):
            word = "A" * a + "a" * b if rule == "normal" else "a" * b + "A" * a
            _add_terms(acc, ccr_normal_form(word, hbar), hbar ** ((a + b) / 2) * w[a, b])
        return acc
    poly = mono.as_poly(hbar)
    for n, m in np.argwhere(np.abs(poly.coeffs) > 1e-15):
        c = poly.coeffs[n, m]
        if rule == "weyl":
            words = [("q" * (n - j) + "p" * m + "q" * j, comb(n, j) / 2**n) for j in range(n + 1)]
        elif rule == "standard":
            words = [("q" * n + "p" * m, 1.0)]
        elif rule == "antistandard":
            words = [("p" * m + "q" * n, 1.0)]
        elif rule == "symmetric":
            words = [("q" * n + "p" * m, 0.5), ("p" * m + "q" * n, 0.5)]
        elif rule == "born-jordan":
            words = [("p" * (m - j) + "q" * n + "p" * j, 1.0 / (m + 1)) for j in range(m + 1)]
        else:
            raise KeyError(rule)
        for word, wgt in words:
            _add_terms(acc, ccr_normal_form(word, hbar), c * wgt)
    return acc


def ordering_table_errors(max_degree: int = 4, N: int = 64, hbar: float = 1.0) -> list[dict]:
    """Interior Frobenius error of every table row against the CCR oracle."""
    basis = FockBasis(N)
    rows = []
    for rule in RULE_NAMES:
        for n in range(max_degree + 1):
            for m in range(max_degree + 1 - n):
                mono = MonomialOp(n, m)
                got = quantize_monomial(mono, rule, basis, hbar)
                ref = normal_form_matrix(table_row_oracle(mono, rule, hbar), N)
                err = interior_error(got, ref, mono.degree)
                scale = max(np.linalg.norm(interior(ref, mono.degree)), 1.0)
                rows.append({"rule": rule, "n": n, "m": m, "abs_error": err, "rel_error": err / scale})
    return rows


# Weyl kernel and symbol quantization


def laguerre_functions(k: int, x: np.ndarray, nmax: int, log_scale: np.ndarray | float = 0.0) -> np.ndarray:
    """Normalized Laguerre functions ``sqrt(n!/(n+k)!) x^(k/2) e^(-x/2) L_n^k(x)``, n < nmax.

    ``log_scale`` is added to the logarithm of the starting value; the
    recurrence is linear, so this rescales every row (used to fold quadrature
    weights in without underflow).
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((nmax,) + x.shape)
    if nmax == 0:
        return out
    with np.errstate(divide="ignore"):
        log0 = -0.5 * x - 0.5 * lgamma(k + 1) + log_scale
        if k:
            log0 = log0 + 0.5 * k * np.log(x)
    out[0] = np.exp(log0)
    if nmax > 1:
        out[1] = (k + 1 - x) * out[0] / sqrt(k + 1)
    for n in range(1, nmax - 1):
        out[n + 1] = ((2 * n + k + 1 - x) * out[n] - sqrt(n * (n + k)) * out[n - 1]) / sqrt((n + 1) * (n + k + 1))
    return out


def _alpha(q, p, hbar: float):
    """Coherent amplitude of the phase point: ``alpha = (q + i p)/sqrt(2 hbar)``."""
    return (np.asarray(q) + 1j * np.asarray(p)) / np.sqrt(2.0 * hbar)


def weyl_kernel(q: float, p: float, N: int, hbar: float = 1.0) -> np.ndarray:
    """Matrix of the Weyl kernel ``Delta(z) = 2 D(alpha) Parity D(alpha)^dagger`` on N levels.

    ``Delta[n+k, n] = 2 (-1)^n e^(i k arg alpha) l_n^k(4|alpha|^2)``; it is Hermitian,
    ``f(z) = Tr(A Delta(z))`` is the Weyl symbol of ``A`` and
    ``A = int f(z) Delta(z) dq dp / (2 pi hbar)``.
    """
    al = complex(_alpha(q, p, hbar))
    x, phi = 4 * abs(al) ** 2, np.angle(al)
    out = np.zeros((N, N), dtype=complex)
    sign = (-1.0) ** np.arange(N)
    for k in range(N):
        ell = laguerre_functions(k, x, N - k)
        col = 2 * sign[: N - k] * np.exp(1j * k * phi) * ell
        idx = np.arange(N - k)
        out[idx + k, idx] = col
        out[idx, idx + k] = np.conj(col)
    return out


def _kernel_route(values: np.ndarray, q: np.ndarray, p: np.ndarray, weight: np.ndarray | float, N: int, hbar: float):
    """``sum_z f(z) Delta(z) w(z)`` over a point cloud (flattened arrays)."""
    al = _alpha(q, p, hbar)
    x, phi = 4 * np.abs(al) ** 2, np.angle(al)
    fw = values * weight
    sign = (-1.0) ** np.arange(N)
    out = np.zeros((N, N), dtype=complex)
    for k in range(N):
        ell = laguerre_functions(k, x, N - k)  # (N-k, P)
        rot = np.exp(1j * k * phi)
        idx = np.arange(N - k)
        out[idx + k, idx] = 2 * sign[: N - k] * (ell @ (fw * rot))
        if k:
            out[idx, idx + k] = 2 * sign[: N - k] * (ell @ (fw * np.conj(rot)))
    return out


def _displacement_route(g: Symbol, N: int, cutoff: float = 1e-16) -> np.ndarray:
    """``sum_zeta f~(zeta) D(zeta) dlambda~`` with exactly exponentiated truncated generators.

    ``D(zeta) = exp(beta a^dagger - conj(beta) a)``, ``beta = (zeta_q + i zeta_p)/sqrt(2 hbar)``,
    equals ``U_phi exp(|beta| (a^dagger - a)) U_phi^dagger`` with ``U_phi = exp(i phi n)``.
    One Hermitian eigendecomposition of ``-i (a^dagger - a)`` serves every lattice cell.
    """
    grid = g.grid
    a = annihilation(N).real
    lam, V = np.linalg.eigh(-1j * (a.T - a))
    zq, zp = grid.frequency_mesh()
    vals = g.values.ravel() * grid.dual_liouville_weight
    keep = np.abs(vals) > cutoff * np.abs(vals).max() if np.any(vals) else np.zeros(vals.shape, bool)
    beta = ((zq + 1j * zp).ravel() / np.sqrt(2 * grid.hbar))[keep]
    vals = vals[keep]
    r, phi = np.abs(beta), np.angle(beta)
    shifts = np.arange(-(N - 1), N)
    C = np.zeros((len(shifts), N), dtype=complex)
    chunk = 4096
    for s in range(0, len(vals), chunk):
        sl = slice(s, s + chunk)
        F = vals[sl, None] * np.exp(1j * np.outer(phi[sl], shifts))
        E = np.exp(1j * np.outer(r[sl], lam))
        C += F.T @ E
    m = np.arange(N)
    diff = m[:, None] - m[None, :] + (N - 1)
    # A[m, n] = sum_k V[m, k] conj(V[n, k]) C[k](m - n)
    return np.einsum("mk,nk,mnk->mn", V, V.conj(), C[diff])


def _weyl_grid_symbol(f: Symbol) -> Symbol:
    if f.domain != PHASE:
        f = inverse_symplectic_fourier(f)
    if f.ordering != "weyl":
        from .omega import convert_symbol

        f = convert_symbol(f, to="weyl")
    return f


def _is_windowed(f: Symbol) -> bool:
    vals = np.abs(f.values)
    if np.ptp(vals) <= 1e-8 * vals.max():
        return False  # constants pass the window check but fill every level
    try:
        check_window(f)
    except AliasingError:
        return False
    return True


def quantize_symbol(f: Symbol, basis, method: str = "kernel", truncation_check: bool = True) -> OperatorMatrix:
    """Operator matrix of a grid symbol.

    Non-Weyl symbols are converted to Weyl ordering first.  In the Fock basis
    ``method="kernel"`` sums ``f(z) Delta(z)`` over the phase lattice, which
    gives the exact compression of the operator (up to the Riemann sum), and
    also handles symbols that do not vanish at the window edge (polynomials)
    as long as the retained levels live inside the window.
    ``method="displacement"`` sums ``f~(zeta) D(zeta)`` over the frequency
    lattice with exponentials of the truncated generator; it agrees on the
    leading levels but is contaminated in roughly the last
    ``max |beta|^2`` levels reached by the spectrum.

    In the position basis the Weyl kernel ``int f((x+y)/2, p) e^(ip(x-y)/hbar) dp``
    is used on the symbol's own q lattice.

    The kernel sum is exact only while the lattice resolves the Weyl kernel of
    the top level, roughly ``2 sqrt(2 N hbar) < pi hbar / dq``; beyond that the
    trailing levels alias (the decay of ``f`` buys some margin).

    The truncation check (last row/column above 1% of the Frobenius norm)
    applies to windowed symbols only; unbounded symbols reach the last level
    by nature.
    """
    f = _weyl_grid_symbol(f)
    grid = f.grid
    if grid.d != 1:
        raise NotImplementedError("quantization is implemented for one degree of freedom")
    if isinstance(basis, PositionBasis):
        return OperatorMatrix(basis, _position_weyl_matrix(f, basis), grid.hbar)
    N = basis.N
    if method == "displacement":
        A = _displacement_route(symplectic_fourier(f), N)
    elif method == "kernel":
        q, p = grid.mesh()
        w = grid.dq * grid.dp / (2 * np.pi * grid.hbar)
        A = _kernel_route(f.values.ravel(), q.ravel(), p.ravel(), w, N, grid.hbar)
    else:
        raise ValueError(f"unknown quantization method {method!r}")
    if truncation_check and _is_windowed(f):
        _check_truncation(A)
    return OperatorMatrix(basis, A, grid.hbar)


def _check_truncation(A: np.ndarray, rows: int = 1, limit: float = 0.01):
    total = np.linalg.norm(A)
    if total == 0:
        return
    edge = np.sqrt(np.sum(np.abs(A[-rows:, :]) ** 2) + np.sum(np.abs(A[:-rows, -rows:]) ** 2))
    if edge > limit * total:
        raise TruncationError(
            f"last basis row/column carries {edge / total:.1%} of the Frobenius norm (limit {limit:.0%})"
        )


def quantize_function(func, basis: FockBasis, hbar: float = 1.0, rule: str = "weyl", n_radial: int = 160,
                      n_angle: int | None = None) -> OperatorMatrix:
    """Fock matrix of a callable symbol ``func(q, p)`` by polar quadrature.

    Used for symbols that neither decay nor are polynomials (resolvents).
    ``rule="weyl"`` integrates against the Weyl kernel; ``rule="antinormal"``
    against coherent-state projectors ``|alpha><alpha|``.  Radial nodes are
    Gauss-Laguerre in ``|alpha|^2`` (``2|alpha|^2`` for the Weyl kernel, whose
    matrix elements decay like ``exp(-2|alpha|^2)``); the angular rule is the
    trapezoid rule, exact for the finitely many angular harmonics involved.
    """
    N = basis.N
    M = n_angle or 2 * N + 8
    u, w = roots_laguerre(n_radial)
    phi = 2 * np.pi * np.arange(M) / M
    out = np.zeros((N, N), dtype=complex)
    m = np.arange(N)
    if rule == "weyl":
        # x = 4|alpha|^2 = 2u, r^2 = hbar u
        r = np.sqrt(hbar * u)
        vals = func(r[:, None] * np.cos(phi), r[:, None] * np.sin(phi))
        F = np.fft.ifft(np.broadcast_to(vals, (n_radial, M)), axis=1) * M  # sum_j f e^{i k phi_j}
        sign = (-1.0) ** m
        with np.errstate(divide="ignore"):
            logw = np.log(w) + u  # e^{-x/2} is carried by the Laguerre functions
        for k in range(N):
            ell = laguerre_functions(k, 2 * u, N - k, log_scale=logw)
            idx = np.arange(N - k)
            pos = F[:, k % M] / M
            neg = F[:, (-k) % M] / M
            out[idx + k, idx] = sign[: N - k] * (ell @ pos)
            if k:
                out[idx, idx + k] = sign[: N - k] * (ell @ neg)
    elif rule == "antinormal":
        # <m|alpha><alpha|n> = e^{-|alpha|^2} alpha^m conj(alpha)^n / sqrt(m! n!), |alpha|^2 = u
        r = np.sqrt(2 * hbar * u)
        vals = np.broadcast_to(func(r[:, None] * np.cos(phi), r[:, None] * np.sin(phi)), (n_radial, M))
        F = np.fft.ifft(vals, axis=1)  # mean over angle of f e^{i k phi}
        logfact = np.array([lgamma(j + 1) for j in range(N)])
        with np.errstate(divide="ignore"):
            logu = np.log(u)
        for k in range(-(N - 1), N):
            mm = np.arange(max(0, k), N + min(0, k))
            nn = mm - k
            # angle integral picks the harmonic e^{i k phi} of f, k = m - n
            harm = F[:, k % M]
            expo = 0.5 * (mm[:, None] + nn[:, None]) * logu[None, :] - 0.5 * (logfact[mm] + logfact[nn])[:, None]
            out[mm, nn] = np.exp(expo) @ (w * harm)
    else:
        raise ValueError("quantize_function supports the weyl and antinormal rules")
    return OperatorMatrix(basis, out, hbar)


# position basis


def _check_position_basis(grid: PhaseGrid, basis: PositionBasis):
    if basis.n_x != grid.n_q or not np.isclose(basis.L_x, grid.L_q):
        raise ValueError("the position basis must share the symbol grid's q lattice (n_x = n_q, L_x = L_q)")


def _half_grid(values: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation along q onto the lattice refined by two."""
    n = values.shape[0]
    spec = np.fft.fftshift(np.fft.fft(values, axis=0), axes=0)
    pad = np.zeros((2 * n,) + values.shape[1:], dtype=complex)
    pad[n // 2 : n // 2 + n] = spec
    pad[n // 2] *= 0.5  # split the Nyquist bucket symmetrically
    pad[n // 2 + n] = pad[n // 2]
    return 2 * np.fft.ifft(np.fft.ifftshift(pad, axes=0), axis=0)


def _position_weyl_matrix(f: Symbol, basis: PositionBasis) -> np.ndarray:
    grid = f.grid
    _check_position_basis(grid, basis)
    n, dx, hbar = basis.n_x, basis.dx, grid.hbar
    fh = _half_grid(f.values)  # rows m = i + j <-> (x_i + x_j)/2
    s = np.arange(-(n - 1), n)
    E = np.exp(1j * np.outer(grid.p, s * dx) / hbar) * grid.dp / (2 * np.pi * hbar)
    G = fh @ E  # (2n, 2n - 1)
    i, j = np.indices((n, n))
    return G[i + j, i - j + n - 1] * dx


def _position_wigner(A: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """``f(X, p) = int K(X + y/2, X - y/2) e^(-ipy/hbar) dy`` at lattice points X (smooth kernels)."""
    n = A.shape[0]
    dx = 2 * grid.L_q / n
    out = np.zeros(grid.shape, dtype=complex)
    s_all = np.arange(-(n - 1), n)
    E = np.exp(-1j * np.outer(s_all * dx, grid.p) / grid.hbar)  # (2n-1, n_p)
    for a in range(n):
        i = np.arange(n)
        j = 2 * a - i
        ok = (j >= 0) & (j < n)
        i, j = i[ok], j[ok]
        out[a] = A[i, j] @ E[i - j + n - 1]
    # y = x_i - x_j runs in steps of 2 dx and K = A / dx, so dy K = 2 A
    return 2 * out


# dequantization


class WeylKernelTable:
    """Weyl-kernel matrix elements at a fixed point set, reused across many matrices."""

    def __init__(self, q, p, N: int, hbar: float = 1.0):
        q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
        self.shape = q.shape
        self.N, self.hbar = N, hbar
        al = _alpha(q.ravel(), p.ravel(), hbar)
        x, phi = 4 * np.abs(al) ** 2, np.angle(al)
        sign = 2 * (-1.0) ** np.arange(N)
        self._rows = []
        for k in range(N):
            ell = sign[: N - k, None] * laguerre_functions(k, x, N - k)
            self._rows.append((ell, np.exp(1j * k * phi)))

    def symbol(self, A) -> np.ndarray:
        M = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A)
        if M.shape != (self.N, self.N):
            raise ValueError(f"expected a {self.N}x{self.N} matrix")
        out = np.zeros(self._rows[0][1].shape, dtype=complex)
        for k, (ell, rot) in enumerate(self._rows):
            idx = np.arange(self.N - k)
            out += rot * (M[idx, idx + k] @ ell)
            if k:
                out += np.conj(rot) * (M[idx + k, idx] @ ell)
        return out.reshape(self.shape)


def weyl_symbol_at(A, q, p, hbar: float | None = None) -> np.ndarray:
    """``Tr(A Delta(z))`` at arbitrary phase points (Fock matrices)."""
    M = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A)
    if hbar is None:
        hbar = A.hbar
    return WeylKernelTable(q, p, M.shape[0], hbar).symbol(M)


def _fock_weyl_symbol(A: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    q, p = grid.mesh()
    return weyl_symbol_at(A, q, p, grid.hbar)


def dequantize(A: OperatorMatrix, rule: str = "weyl", grid: PhaseGrid | None = None, verify: bool = True,
               tol: float = 1e-6, cut: int = 8) -> Symbol:
    """Symbol of ``A`` in ordering ``rule`` on ``grid``.

    The Weyl symbol is ``Tr(A Delta(z))`` (Fock) or the Wigner transform of
    the position kernel; other orderings follow by spectral conversion.  With
    ``verify`` the Weyl symbol is re-quantized and compared with ``A`` on the
    interior block (relative Frobenius error at most ``tol``).
    """
    if grid is None:
        raise ValueError("dequantize needs a target grid")
    if grid.d != 1:
        raise NotImplementedError("dequantization is implemented for one degree of freedom")
    if isinstance(A.basis, PositionBasis):
        _check_position_basis(grid, A.basis)
        vals = _position_wigner(A.entries, grid)
    else:
        vals = _fock_weyl_symbol(A.entries, grid)
    f = Symbol(grid, vals, ordering="weyl")
    if verify:
        back = quantize_symbol(f, A.basis, truncation_check=False).entries
        c = 0 if isinstance(A.basis, PositionBasis) else cut
        ref = interior(A, c)
        err = np.linalg.norm(interior(back, c) - ref) / max(np.linalg.norm(ref), 1e-300)
        if err > tol:
            raise AliasingError(f"grid cannot host the symbol: re-quantization error {err:.2e} > {tol:.0e}")
        f.meta["roundtrip_error"] = float(err)
    name = str(rule).lower()
    if name != "weyl":
        from .omega import convert_symbol

        f = convert_symbol(f, "weyl", name)
    return f


def dequantize_polynomial(A: OperatorMatrix, rule: str = "normal", degree: int = 4) -> PolySymbol:
    """Exact polynomial symbol of a Fock matrix that is a polynomial in the ladder operators.

    The normal-ordered coefficients are peeled off the low-index entries
    (``<m| (a^dagger)^k a^l |n>`` vanishes unless ``n >= l``), then converted to
    ``rule``.
    """
    if not isinstance(A.basis, FockBasis):
        raise TypeError("polynomial dequantization needs a Fock basis")
    N, hbar = A.basis.N, A.hbar
    if N < 2 * degree + 2:
        raise TruncationError("Fock truncation too small for the requested degree")
    M = A.entries.copy()
    coef = {}
    for total in range(degree + 1):
        for l in range(total + 1):
            k = total - l
            # coefficient from the entry <k|.|l>: only terms with l' <= l, k' <= k, k'-l' = k-l contribute
            val = M[k, l] / sqrt(factorial(k) * factorial(l))
            coef[(k, l)] = val
            for col in range(l, N):
                row = col - l + k
                if row < N:
                    M[row, col] -= val * sqrt(_falling(col, l) * _falling(row, k))
    if np.abs(M[: N - degree, : N - degree]).max() > 1e-8 * max(1.0, np.abs(A.entries).max()):
        raise TruncationError("matrix is not a polynomial of the requested degree in the ladder operators")
    w = np.zeros((degree + 1, degree + 1), dtype=complex)
    for (k, l), v in coef.items():
        w[k, l] = v / hbar ** ((k + l) / 2)
    return convert_poly(PolySymbol.from_ladder(w, hbar, "normal"), str(rule).lower())


# trace formula and coordinate kernel


def trace_pairing(f: Symbol, rho: Symbol, rule=None, pairing: str = "plain", check: bool = True) -> complex:
    """Phase-space pairing that stands in for ``Tr(f^ rho^)``.

    ``pairing="plain"`` is ``sum f rho dlambda`` (no conjugation), exact for
    Weyl symbols.  ``pairing="dual"`` first re-expresses ``rho`` in the rule
    dual to ``f``'s (``Omega(zeta) Omega_dual(-zeta) = 1``), which makes the
    pairing exact for the standard/antistandard and normal/antinormal pairs;
    Symmetric and Born-Jordan have no dual and are paired in Weyl form.
    """
    name = str(rule or f.ordering).lower()
    if f.ordering != name or rho.ordering != name:
        raise ValueError(f"both symbols must carry ordering {name!r}")
    if check:
        check_window(rho)
    if pairing == "plain":
        return f.pairing(rho)
    if pairing != "dual":
        raise ValueError(f"unknown pairing {pairing!r}")
    from .omega import as_rule, convert_symbol

    r = as_rule(name)
    if r.has_zeros:
        return convert_symbol(f, name, "weyl").pairing(convert_symbol(rho, name, "weyl"))
    return f.pairing(convert_symbol(rho, name, r.dual.name))


def green_function(u_std: Symbol) -> np.ndarray:
    """Coordinate kernel ``<q''|U|q'> = int u(q'', p) e^(i p (q'' - q')/hbar) dp / (2 pi hbar)``.

    ``u_std`` is a standard-ordering symbol; rows index q'' and columns q' on
    the symbol's q lattice.  The p integral is a Riemann sum, evaluated as a
    dense transform because the (q, p) lattices are not FFT-commensurate.
    """
    if str(u_std.ordering).lower() != "standard":
        raise ValueError("green_function expects a standard-ordering symbol")
    grid = u_std.grid
    if grid.d != 1:
        raise NotImplementedError("green_function is implemented for d = 1")
    q, p, hbar = grid.q, grid.p, grid.hbar
    out = np.empty((grid.n_q, grid.n_q), dtype=complex)
    for a in range(grid.n_q):
        E = np.exp(1j * np.outer(p, q[a] - q) / hbar)
        out[a] = u_std.values[a] @ E
    return out * grid.dp / (2 * np.pi * hbar)
