"""Ordering factors, symbol conversions and products of symbols.

Each ordering rule is a function Omega(zeta) on the frequency lattice.  The
Omega-symbol of an operator with Weyl symbol ``f`` has transform
``f~ / Omega``.  Frequencies are fed to Omega in units of ``sqrt(hbar)``:
with that scaling ``zeta_q zeta_p / 2`` becomes ``(hbar/2) d_q d_p`` and
``zeta+ zeta- / 2`` becomes ``-(hbar/4) Laplacian``, which reproduces the
operator orderings exactly on polynomials.

For the Symmetric and Born-Jordan rules the factor is ``cos(x)`` and
``sin(x)/x`` with the real argument ``x = ((zeta+)^2 - (zeta-)^2) / 4i =
zeta_q zeta_p / 2``.  That is the choice for which the rules reproduce
``(q^n p^m + p^m q^n)/2`` and the Born-Jordan average, and it is the one
with zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Sequence

import numpy as np

from .phase_grid import (
    FREQUENCY,
    PHASE,
    AliasingError,
    PhaseGrid,
    PhasePoint,
    Symbol,
    inverse_symplectic_fourier,
    symplectic_fourier,
)
from .polynomial import PolySymbol, convert_poly, moyal_product

RULE_NAMES = ("weyl", "standard", "antistandard", "normal", "antinormal", "symmetric", "born-jordan")

_STRICTNESS = {
    "weyl": "strict_everywhere",
    "standard": "strict_everywhere",
    "antistandard": "strict_everywhere",
    "normal": "strict_everywhere",
    "antinormal": "strict_on_multipliers",
    "symmetric": "formal_only",
    "born-jordan": "formal_only",
}

# noise cells below this fraction of the spectral peak are dropped where a
# conversion amplifies (otherwise rounding noise is blown up by exp(|zeta|^2))
NOISE_FLOOR = 64 * np.finfo(float).eps


class ZeroSetViolation(ValueError):
    """Spectral mass sits on the zero set of the target ordering factor."""


@dataclass(frozen=True)
class OrderingRule:
    name: str

    def __post_init__(self):
        if self.name not in RULE_NAMES:
            raise KeyError(f"unknown ordering rule {self.name!r}; choose from {', '.join(RULE_NAMES)}")

    @property
    def has_zeros(self) -> bool:
        return self.name in ("symmetric", "born-jordan")

    @property
    def strictness(self) -> str:
        return _STRICTNESS[self.name]

    @property
    def dual(self) -> "OrderingRule":
        """Rule with ``Omega(zeta) Omega_dual(-zeta) = 1`` where one exists."""
        pairs = {"standard": "antistandard", "antistandard": "standard", "normal": "antinormal", "antinormal": "normal"}
        return OrderingRule(pairs.get(self.name, self.name))

    def omega(self, zeta_q, zeta_p):
        """Omega at dimensionless frequencies; arrays may carry a leading mode axis."""
        return _omega_values(self.name, np.asarray(zeta_q, dtype=float), np.asarray(zeta_p, dtype=float))

    def __str__(self) -> str:
        return self.name


def as_rule(rule) -> OrderingRule:
    return rule if isinstance(rule, OrderingRule) else OrderingRule(str(rule).lower())


def _omega_values(name: str, zq: np.ndarray, zp: np.ndarray, mode_axis: bool = False) -> np.ndarray:
    if mode_axis:
        x = 0.5 * np.sum(zq * zp, axis=0)
        r2 = np.sum(zq**2 + zp**2, axis=0)
    else:
        x = 0.5 * zq * zp
        r2 = zq**2 + zp**2
    if name == "weyl":
        return np.ones(np.shape(x), dtype=complex)
    if name == "standard":
        return np.exp(1j * x)
    if name == "antistandard":
        return np.exp(-1j * x)
    # zeta+ zeta- = (zq^2 + zp^2)/2
    with np.errstate(over="ignore"):
        if name == "normal":
            return np.exp(0.25 * r2).astype(complex)
        if name == "antinormal":
            return np.exp(-0.25 * r2).astype(complex)
    if name == "symmetric":
        return np.cos(x).astype(complex)
    if name == "born-jordan":
        return np.sinc(x / np.pi).astype(complex)
    raise KeyError(name)


def omega_factor(rule, zeta: PhasePoint) -> complex:
    """Omega(zeta) from the complex coordinates of a dimensionless frequency point."""
    name = as_rule(rule).name
    zp_, zm_ = np.atleast_1d(zeta.zplus), np.atleast_1d(zeta.zminus)
    if name == "weyl":
        return 1.0 + 0j
    # ((zeta+)^2 - (zeta-)^2)/4 = i zeta_q zeta_p / 2 is purely imaginary
    quarter = np.sum(zp_**2 - zm_**2) / 4
    half_pm = np.real(np.sum(zp_ * zm_)) / 2
    if name == "standard":
        return complex(np.exp(quarter))
    if name == "antistandard":
        return complex(np.exp(-quarter))
    if name == "normal":
        return complex(np.exp(half_pm))
    if name == "antinormal":
        return complex(np.exp(-half_pm))
    x = float(np.imag(quarter))
    if name == "symmetric":
        return complex(np.cos(x))
    return complex(np.sinc(x / np.pi))


def omega_on_grid(rule, grid: PhaseGrid) -> np.ndarray:
    """Omega over the frequency lattice of ``grid`` (frequencies scaled by sqrt(hbar))."""
    zq, zp = grid.frequency_mesh()
    s = np.sqrt(grid.hbar)
    return _omega_values(as_rule(rule).name, zq / s, zp / s, mode_axis=grid.d == 2)


def _ratio(frm: str, to: str, grid: PhaseGrid, margin: float):
    num = omega_on_grid(frm, grid)
    den = omega_on_grid(to, grid)
    bad = np.zeros(den.shape, dtype=bool)
    if as_rule(to).has_zeros:
        bad = np.abs(den) < margin * np.abs(den).max()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = np.where(bad, 0.0, num / np.where(bad, 1.0, den))
    return ratio, bad


def convert_symbol(f: Symbol, frm=None, to="weyl", margin: float = 1e-6, noise_floor: float = NOISE_FLOOR) -> Symbol:
    """Re-express ``f`` (ordering ``frm``) in ordering ``to``: ``f~_to = f~ Omega_from / Omega_to``.

    Frequency cells where ``|Omega_to| < margin * max|Omega_to|`` are dropped; if they
    carry more than 1e-10 of the spectral mass, ZeroSetViolation is raised.
    """
    frm = as_rule(f.ordering if frm is None else frm).name
    to = as_rule(to).name
    if frm == to:
        return f.replace(ordering=to)
    spectral = f.domain == FREQUENCY
    g = f if spectral else symplectic_fourier(f)
    ratio, bad = _ratio(frm, to, f.grid, margin)
    vals = g.values
    mass = np.abs(vals) ** 2
    total = mass.sum()
    dropped = float(mass[bad].sum() / total) if total > 0 else 0.0
    if dropped > 1e-10:
        raise ZeroSetViolation(
            f"{dropped:.2e} of the spectral mass lies on the zero set of the {to} factor"
        )
    amplify = np.abs(ratio) > 1.0
    noise = amplify & (np.abs(vals) < noise_floor * np.abs(vals).max())
    out = np.where(noise, 0.0, vals * ratio)
    if not np.all(np.isfinite(out)):
        raise AliasingError(f"conversion {frm} -> {to} overflows on this frequency lattice")
    h = Symbol(f.grid, out, ordering=to, domain=FREQUENCY)
    res = h if spectral else inverse_symplectic_fourier(h)
    res.meta.update(f.meta)
    res.meta.update({"zero_set_mass": dropped, "noise_cells": int(noise.sum())})
    return res


# products


def twisted_convolution(g1: np.ndarray, g2: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Transform of the Weyl product from the transforms of the factors (d = 1).

    ``h(zeta) = sum_a g1(a) g2(zeta - a) exp((i/2hbar) sigma(a, zeta)) dlambda~``
    with ``sigma(a, zeta) = a_p zeta_q - zeta_p a_q``; the lattice is not
    periodised (out-of-window differences contribute zero).
    """
    if grid.d != 1:
        raise NotImplementedError("kernel products are implemented for d = 1")
    zq, zp = grid.zeta_q, grid.zeta_p
    nq_, np_ = g1.shape  # (zeta_q axis, zeta_p axis)
    c_q, c_p = nq_ // 2, np_ // 2
    L = 2 * np_
    half = 0.5j / grid.hbar
    rows = np.arange(nq_)
    phase_in = np.exp(half * np.outer(zq, zp))  # [i, j1]: zeta_p1[j1] zeta_q[i]
    phase_out = np.exp(-half * np.outer(zq, zp))  # [i1, j]: zeta_q1[i1] zeta_p[j]
    G2 = np.fft.fft(g2, L, axis=1)
    live2 = np.abs(g2).max(axis=1) > 0
    scale = np.abs(g1).max()
    out = np.zeros(g1.shape, dtype=complex)
    for i1 in range(nq_):
        row = g1[i1]
        if not np.any(np.abs(row) > 1e-300 + 1e-20 * scale):
            continue
        src = rows - i1 + c_q
        ok = (src >= 0) & (src < nq_)
        ok[ok] &= live2[src[ok]]
        if not np.any(ok):
            continue
        a = np.fft.fft(row[None, :] * phase_in[ok], L, axis=1)
        conv = np.fft.ifft(a * G2[src[ok]], axis=1)[:, c_p : c_p + np_]
        out[ok] += conv * phase_out[i1][None, :]
    return out * grid.dual_liouville_weight


def _require_same(f1: Symbol, f2: Symbol, rule: str):
    if f1.grid != f2.grid:
        raise ValueError("factors live on different grids")
    for f in (f1, f2):
        if as_rule(f.ordering).name != rule:
            raise ValueError(f"factor carries ordering {f.ordering!r}, expected {rule!r}")


def _spectral_derivative(f: np.ndarray, grid: PhaseGrid, nq: int, np_: int) -> np.ndarray:
    if nq == 0 and np_ == 0:
        return f
    kq = 2 * np.pi * np.fft.fftfreq(grid.n_q, d=grid.dq)
    kp = 2 * np.pi * np.fft.fftfreq(grid.n_p, d=grid.dp)
    mult = (1j * kq[:, None]) ** nq * (1j * kp[None, :]) ** np_
    # odd derivatives: the Nyquist mode has no consistent sign, drop it
    if nq % 2:
        mult[grid.n_q // 2, :] = 0
    if np_ % 2:
        mult[:, grid.n_p // 2] = 0
    return np.fft.ifft2(np.fft.fft2(f) * mult)


def _moyal_terms(f, g, K: int, deriv, hbar: float):
    """Terms ``k = 0..K`` of the bidifferential Weyl product series."""
    terms = []
    for k in range(K + 1):
        pref = (0.5j * hbar) ** k / factorial(k)
        acc = 0
        for j in range(k + 1):
            acc = acc + (-1) ** j * comb(k, j) * deriv(f, k - j, j) * deriv(g, j, k - j)
        terms.append(pref * acc)
    return terms


def omega_product(f1, f2, rule="weyl", method: str = "kernel", order: int = 4, tol: float | None = None):
    """Omega-symbol of the operator product of two Omega-symbols.

    ``method="kernel"`` evaluates the twisted convolution in frequency space;
    ``method="asymptotic"`` truncates the bidifferential expansion after
    ``order`` terms (order <= 4) and records the size of the last term as the
    remainder estimate in ``meta["remainder"]``.  Exact polynomial symbols
    (:class:`PolySymbol`) are accepted by both methods.
    """
    rule = as_rule(rule).name
    if method not in ("kernel", "asymptotic"):
        raise ValueError(f"unknown product method {method!r}")
    if method == "asymptotic" and not 0 <= order <= 4:
        raise ValueError("asymptotic order must lie in 0..4")
    if isinstance(f1, PolySymbol):
        return _poly_product(f1, f2, rule, method, order)
    _require_same(f1, f2, rule)
    grid = f1.grid
    meta = {"method": method}
    if method == "kernel":
        # Omega(a) Omega(b) / Omega(a + b) applied on the frequency lattice; staying there
        # avoids re-windowing the (possibly amplified) Weyl forms of the factors
        g1 = convert_symbol(symplectic_fourier(f1), rule, "weyl")
        g2 = convert_symbol(symplectic_fourier(f2), rule, "weyl")
        h = Symbol(grid, twisted_convolution(g1.values, g2.values, grid), "weyl", FREQUENCY)
        out = inverse_symplectic_fourier(convert_symbol(h, "weyl", rule))
        out.meta.update(meta)
        return out
    w1 = convert_symbol(f1, rule, "weyl")
    w2 = convert_symbol(f2, rule, "weyl")
    if grid.d != 1:
        raise NotImplementedError("asymptotic products are implemented for d = 1")
    deriv = lambda a, i, j: _spectral_derivative(a, grid, i, j)  # noqa: E731
    terms = _moyal_terms(w1.values, w2.values, order, deriv, grid.hbar)
    prod = Symbol(grid, sum(terms), "weyl")
    interior = grid.interior_mask()
    remainder = float(np.abs(terms[-1][interior]).max()) if order > 0 else float("nan")
    meta["remainder"] = remainder
    if tol is not None and remainder > tol:
        raise ArithmeticError(f"asymptotic remainder estimate {remainder:.2e} exceeds {tol:.2e}")
    out = convert_symbol(prod, "weyl", rule)
    out.meta.update(meta)
    return out


def _poly_product(f1: PolySymbol, f2: PolySymbol, rule: str, method: str, order: int) -> PolySymbol:
    if f1.ordering != rule or f2.ordering != rule:
        raise ValueError(f"both factors must carry ordering {rule!r}")
    w1, w2 = convert_poly(f1, "weyl"), convert_poly(f2, "weyl")
    if method == "kernel":
        prod = moyal_product(w1, w2)
    else:
        terms = _moyal_terms(w1, w2, order, lambda a, i, j: a.derivative(i, j), f1.hbar)
        prod = sum(terms[1:], terms[0])
    return convert_poly(prod.replace(ordering="weyl"), rule)


# order diagnostics


@dataclass
class OrderDiagnostics:
    m1: float
    m2: float
    r1: float
    r2: float
    residual: float
    inconclusive: bool
    samples: int = 0
    notes: list = field(default_factory=list)

    @property
    def in_class(self) -> bool:
        return self.r1 >= 0 and self.r2 < 0.5


def _fd_derivative(f: np.ndarray, dq: float, dp: float, nq: int, np_: int) -> np.ndarray:
    out = f
    for _ in range(nq):
        out = np.gradient(out, dq, axis=0, edge_order=2)
    for _ in range(np_):
        out = np.gradient(out, dp, axis=1, edge_order=2)
    return out


def estimate_order(family: Sequence[Symbol], max_order: int = 3, n_shells: int = 12, r_min: float | None = None,
                   threshold: float = 0.3, zero_tol: float = 1e-9) -> OrderDiagnostics:
    """Fit ``|d^a f| ~ (1+|z|)^(m1 - r1|a|) hbar^(m2 - r2|a|)`` over shells and hbar values.

    ``family`` holds the same symbol sampled at several hbar values (each on
    its own d = 1 grid).  Derivatives are central finite differences, so
    non-periodic symbols such as polynomials are handled.  Derivative orders
    that vanish identically are left out of the fit.  Shells run from
    ``r_min`` (default a quarter of the outer radius) to 80% of the window.
    The abscissa is ``log |z|``: on those shells ``1 + |z|`` and ``|z|`` give
    the same exponent, but regressing on ``log(1 + |z|)`` inflates the slope by
    ``(1 + R)/R`` at finite R.
    """
    if len(family) < 4:
        raise ValueError("need at least four hbar values")
    rows, rhs = [], []
    orders_seen = set()
    for f in family:
        g = f.grid
        if g.d != 1:
            raise NotImplementedError("order estimation is implemented for d = 1")
        q, p = g.mesh()
        r = np.hypot(q, p)
        r_max = 0.8 * min(g.L_q, g.L_p)
        edges = np.geomspace(r_min or 0.25 * r_max, r_max, n_shells + 1)
        fd = {}
        for k in range(max_order + 1):
            fd[k] = np.max(
                [np.abs(_fd_derivative(f.values, g.dq, g.dp, k - j, j)) for j in range(k + 1)], axis=0
            )
        scale = max(np.abs(f.values).max(), 1e-300)
        for k in range(max_order + 1):
            for lo, hi in zip(edges[:-1], edges[1:]):
                shell = (r >= lo) & (r < hi)
                if not np.any(shell):
                    continue
                val = fd[k][shell].max()
                if val <= zero_tol * scale * max(1.0, hi) ** 2:
                    continue
                R = 0.5 * (lo + hi)
                x, y = np.log(R), np.log(g.hbar)
                row = np.zeros(4 + max_order + 1)
                row[:4] = (x, y, -k * x, -k * y)
                row[4 + k] = 1.0
                rows.append(row)
                rhs.append(np.log(val))
                orders_seen.add(k)
    if not rows:
        return OrderDiagnostics(0.0, 0.0, 0.0, 0.0, 0.0, True, 0, ["symbol vanishes identically"])
    A, b = np.array(rows), np.array(rhs)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.sqrt(np.mean((A @ sol - b) ** 2)))
    m1, m2, r1, r2 = (float(v) for v in sol[:4])
    notes = []
    if len(orders_seen) == 1:
        notes.append("only one derivative order is non-zero; r1, r2 are not identified")
    return OrderDiagnostics(m1, m2, r1, r2, resid, resid > threshold, len(b), notes)
