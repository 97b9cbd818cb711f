"""Exact polynomial symbols in one degree of freedom.

A :class:`PolySymbol` stores coefficients ``c[n, m]`` of ``q^n p^m``.  Ordering
conversions and Moyal products act on it as finite differential operators,
since every Omega factor is a power series in

    X = (hbar/2) d_q d_p          (from zeta_q zeta_p / 2 hbar)
    Y = -(hbar/4) (d_q^2 + d_p^2) (from zeta+ zeta- / 2 hbar)

and both lower the total degree by two.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

DEFAULT_DEGREE_CAP = 6


def _series_exp(s: complex, order: int) -> np.ndarray:
    return np.array([s**k / factorial(k) for k in range(order + 1)], dtype=complex)


def _series_cos(order: int) -> np.ndarray:
    out = np.zeros(order + 1, dtype=complex)
    for k in range(0, order + 1, 2):
        out[k] = (-1) ** (k // 2) / factorial(k)
    return out


def _series_sinc(order: int) -> np.ndarray:
    out = np.zeros(order + 1, dtype=complex)
    for k in range(0, order + 1, 2):
        out[k] = (-1) ** (k // 2) / factorial(k + 1)
    return out


def series_inverse(a: np.ndarray) -> np.ndarray:
    """Reciprocal of a power series with ``a[0] != 0``, truncated to the same order."""
    n = len(a)
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0 / a[0]
    for k in range(1, n):
        b[k] = -np.dot(a[1 : k + 1], b[k - 1 :: -1][:k]) / a[0]
    return b


# Omega factors as (variable, series) with variable "X" or "Y"; None means 1.
def omega_series(rule: str, order: int):
    if rule == "weyl":
        return None
    if rule == "standard":
        return "X", _series_exp(1j, order)
    if rule == "antistandard":
        return "X", _series_exp(-1j, order)
    if rule == "normal":
        return "Y", _series_exp(1.0, order)
    if rule == "antinormal":
        return "Y", _series_exp(-1.0, order)
    if rule == "symmetric":
        return "X", _series_cos(order)
    if rule == "born-jordan":
        return "X", _series_sinc(order)
    raise KeyError(rule)


def _trim(c: np.ndarray, degree: int) -> np.ndarray:
    out = np.zeros((degree + 1, degree + 1), dtype=complex)
    k = min(degree + 1, c.shape[0])
    out[:k, :k] = c[:k, :k]
    return out


@dataclass(frozen=True, eq=False)
class PolySymbol:
    coeffs: np.ndarray
    hbar: float = 1.0
    ordering: str = "weyl"

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        n = max(c.shape)
        sq = np.zeros((n, n), dtype=complex)
        sq[: c.shape[0], : c.shape[1]] = c
        object.__setattr__(self, "coeffs", sq)

    # construction

    @classmethod
    def monomial(cls, n: int, m: int, hbar: float = 1.0, ordering: str = "weyl", coeff: complex = 1.0):
        c = np.zeros((n + m + 1, n + m + 1), dtype=complex)
        c[n, m] = coeff
        return cls(c, hbar, ordering)

    @classmethod
    def constant(cls, value: complex, hbar: float = 1.0, ordering: str = "weyl"):
        return cls(np.array([[value]]), hbar, ordering)

    @classmethod
    def from_ladder(cls, w: np.ndarray, hbar: float = 1.0, ordering: str = "normal"):
        """Build from coefficients ``w[a, b]`` of ``c^a cbar^b``.

        Here ``c = (q - i p)/sqrt(2)`` is the classical variable of the creation
        operator and ``cbar = (q + i p)/sqrt(2)`` that of the annihilation one.
        """
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        deg = w.shape[0] + w.shape[1] - 2
        out = np.zeros((deg + 1, deg + 1), dtype=complex)
        c_lin = np.array([[0, -1j], [1, 0]], dtype=complex) / np.sqrt(2)  # q - i p
        cb_lin = np.array([[0, 1j], [1, 0]], dtype=complex) / np.sqrt(2)  # q + i p
        for a in range(w.shape[0]):
            for b in range(w.shape[1]):
                if w[a, b] == 0:
                    continue
                term = np.array([[1.0 + 0j]])
                for _ in range(a):
                    term = _polymul(term, c_lin)
                for _ in range(b):
                    term = _polymul(term, cb_lin)
                out[: term.shape[0], : term.shape[1]] += w[a, b] * term
        return cls(out, hbar, ordering)

    def to_ladder(self) -> np.ndarray:
        """Coefficients ``w[a, b]`` of ``c^a cbar^b`` (inverse of :meth:`from_ladder`)."""
        deg = self.degree
        out = np.zeros((deg + 1, deg + 1), dtype=complex)
        q_lin = np.array([[0, 1], [1, 0]], dtype=complex) / np.sqrt(2)  # (c + cbar)/sqrt2
        p_lin = np.array([[0, -1j], [1j, 0]], dtype=complex) / np.sqrt(2)  # i(c - cbar)/sqrt2
        for n in range(deg + 1):
            for m in range(deg + 1 - n):
                if self.coeffs[n, m] == 0:
                    continue
                term = np.array([[1.0 + 0j]])
                for _ in range(n):
                    term = _polymul(term, q_lin)
                for _ in range(m):
                    term = _polymul(term, p_lin)
                out[: term.shape[0], : term.shape[1]] += self.coeffs[n, m] * term
        return out

    # structure

    @property
    def degree(self) -> int:
        nz = np.argwhere(np.abs(self.coeffs) > 0)
        if len(nz) == 0:
            return 0
        return int(nz.sum(axis=1).max())

    def replace(self, coeffs=None, ordering=None) -> "PolySymbol":
        return PolySymbol(
            self.coeffs if coeffs is None else coeffs,
            self.hbar,
            self.ordering if ordering is None else ordering,
        )

    def __call__(self, q, p):
        q = np.asarray(q, dtype=complex)
        p = np.asarray(p, dtype=complex)
        out = np.zeros(np.broadcast(q, p).shape, dtype=complex)
        for n, m in np.argwhere(self.coeffs != 0):
            out = out + self.coeffs[n, m] * q**n * p**m
        return out

    def _binary(self, other, op):
        if isinstance(other, PolySymbol):
            if other.hbar != self.hbar or other.ordering != self.ordering:
                raise ValueError("incompatible polynomial symbols")
            n = max(self.coeffs.shape[0], other.coeffs.shape[0])
            return self.replace(op(_trim(self.coeffs, n - 1), _trim(other.coeffs, n - 1)))
        c = self.coeffs.copy()
        c[0, 0] = op(c[0, 0], other)
        return self.replace(c)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, PolySymbol):
            return self.replace(_polymul(self.coeffs, scalar.coeffs))
        return self.replace(self.coeffs * scalar)

    __rmul__ = __mul__

    def allclose(self, other: "PolySymbol", atol: float = 1e-12) -> bool:
        n = max(self.coeffs.shape[0], other.coeffs.shape[0]) - 1
        return np.allclose(_trim(self.coeffs, n), _trim(other.coeffs, n), atol=atol, rtol=0)

    # calculus

    def derivative(self, nq: int = 0, np_: int = 0) -> "PolySymbol":
        return self.replace(_deriv(self.coeffs, nq, np_))

    def apply_series(self, var: str, series: np.ndarray) -> "PolySymbol":
        """Apply ``sum_k series[k] V^k`` with ``V`` the X or Y operator."""
        out = np.zeros_like(self.coeffs)
        term = self.coeffs.copy()
        for k, s in enumerate(series):
            if not np.any(term):
                break
            out += s * term
            term = _apply_var(term, var, self.hbar)
        return self.replace(out)


def _polymul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1), dtype=complex)
    for i, j in np.argwhere(a != 0):
        out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
    return out


def _deriv(c: np.ndarray, nq: int, np_: int) -> np.ndarray:
    out = c.copy()
    for _ in range(nq):
        k = np.arange(1, out.shape[0])[:, None]
        shifted = np.zeros_like(out)
        shifted[:-1, :] = out[1:, :] * k
        out = shifted
    for _ in range(np_):
        k = np.arange(1, out.shape[1])[None, :]
        shifted = np.zeros_like(out)
        shifted[:, :-1] = out[:, 1:] * k
        out = shifted
    return out


def _apply_var(c: np.ndarray, var: str, hbar: float) -> np.ndarray:
    if var == "X":
        return 0.5 * hbar * _deriv(c, 1, 1)
    if var == "Y":
        return -0.25 * hbar * (_deriv(c, 2, 0) + _deriv(c, 0, 2))
    raise ValueError(var)


def convert_poly(f: PolySymbol, to: str) -> PolySymbol:
    """Exact ordering conversion ``f_to = [Omega_from / Omega_to](D) f_from``."""
    if f.ordering == to:
        return f
    order = f.degree // 2 + 1
    out = f
    src = omega_series(f.ordering, order)
    if src is not None:
        out = out.apply_series(*src)
    dst = omega_series(to, order)
    if dst is not None:
        var, series = dst
        out = out.apply_series(var, series_inverse(series))
    return out.replace(ordering=to)


def moyal_product(f: PolySymbol, g: PolySymbol) -> PolySymbol:
    """Weyl star product; the bidifferential series terminates for polynomials."""
    if f.hbar != g.hbar:
        raise ValueError("hbar mismatch")
    hbar = f.hbar
    kmax = min(f.degree, g.degree)
    out = np.zeros((1, 1), dtype=complex)
    for k in range(kmax + 1):
        pref = (0.5j * hbar) ** k / factorial(k)
        for j in range(k + 1):
            a = _deriv(f.coeffs, k - j, j)
            b = _deriv(g.coeffs, j, k - j)
            term = (-1) ** j * comb(k, j) * pref * _polymul(a, b)
            if term.shape[0] > out.shape[0]:
                out = _trim(out, term.shape[0] - 1)
            out[: term.shape[0], : term.shape[1]] += term
    return PolySymbol(out, hbar, "weyl")


def poly_omega_product(f: PolySymbol, g: PolySymbol, rule: str) -> PolySymbol:
    """Omega-symbol of the operator product for polynomial Omega-symbols."""
    if f.ordering != rule or g.ordering != rule:
        raise ValueError(f"both factors must carry ordering {rule!r}")
    prod = moyal_product(convert_poly(f, "weyl"), convert_poly(g, "weyl"))
    return convert_poly(prod, rule)
