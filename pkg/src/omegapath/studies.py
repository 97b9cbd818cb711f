"""Oracle checks shared by the command line and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .omega import omega_product, twisted_convolution
from .phase_grid import FREQUENCY, PhaseGrid, Symbol, inverse_symplectic_fourier, symplectic_fourier
from .polynomial import PolySymbol
from .quantizer import FockBasis, WeylKernelTable, ordering_table_errors, quantize_function

__all__ = ["ordering_check", "star_product_check", "commutator_check", "trace_check", "windowed_monomial"]


def ordering_check(max_degree: int = 4, N: int = 64, hbar: float = 1.0) -> list[dict]:
    rows = ordering_table_errors(max_degree, N, hbar)
    for r in rows:
        r["hbar"] = hbar
    return rows


def windowed_monomial(n: int, m: int, hbar: float, variance: float = 2.0):
    """``(q/sqrt(hbar))^n (p/sqrt(hbar))^m`` times a centered Gaussian of variance ``variance * hbar``."""
    s = np.sqrt(hbar)
    v = variance * hbar

    def f(q, p):
        return (q / s) ** n * (p / s) ** m * np.exp(-(q * q + p * p) / (2 * v))

    return f


def star_product_check(hbar: float = 1.0, n: int = 128, width: float = 16.0, N: int = 64,
                       max_degree: int = 4, n_radial: int = 120) -> list[dict]:
    """Kernel-method Weyl products of windowed monomial pairs against quantize-multiply-dequantize.

    Pairs run over total degree ``<= max_degree``; errors are relative to the
    oracle's peak on the central half of the grid.
    """
    grid = PhaseGrid.default(hbar, n=n, width=width)
    monos = [(a, d - a) for d in range(max_degree + 1) for a in range(d + 1)]
    funcs = {mn: windowed_monomial(*mn, hbar) for mn in monos}
    spec = {mn: symplectic_fourier(grid.sample(funcs[mn])).values for mn in monos}
    basis = FockBasis(N)
    mats = {mn: quantize_function(funcs[mn], basis, hbar, n_radial=n_radial).entries for mn in monos}
    mask = grid.interior_mask()
    q, p = grid.mesh()
    table = WeylKernelTable(q[mask], p[mask], N, hbar)
    rows = []
    for a in monos:
        for b in monos:
            if sum(a) + sum(b) > max_degree:
                continue
            h = twisted_convolution(spec[a], spec[b], grid)
            got = inverse_symplectic_fourier(Symbol(grid, h, "weyl", FREQUENCY)).values[mask]
            ref = table.symbol(mats[a] @ mats[b])
            err = float(np.abs(got - ref).max() / np.abs(ref).max())
            rows.append({"hbar": hbar, "n1": a[0], "m1": a[1], "n2": b[0], "m2": b[1], "rel_error": err})
    return rows


def commutator_check(hbar: float = 1.0) -> dict:
    """``q * p - p * q`` with both the exact and the asymptotic product (polynomial path)."""
    q = PolySymbol.monomial(1, 0, hbar)
    p = PolySymbol.monomial(0, 1, hbar)
    out = {"hbar": hbar}
    for method in ("kernel", "asymptotic"):
        c = omega_product(q, p, "weyl", method) - omega_product(p, q, "weyl", method)
        target = PolySymbol.constant(1j * hbar, hbar)
        n = max(c.coeffs.shape[0], 1)
        diff = np.zeros((n, n), dtype=complex)
        diff[: c.coeffs.shape[0], : c.coeffs.shape[1]] += c.coeffs
        diff[0, 0] -= target.coeffs[0, 0]
        out[method] = float(np.abs(diff).max())
    return out


def _random_bump(rng: np.random.Generator, hbar: float):
    s = np.sqrt(hbar)
    q0, p0 = rng.uniform(-1.5, 1.5, size=2) * s
    v = rng.uniform(1.0, 2.0) * hbar
    c = rng.normal(size=3) + 1j * rng.normal(size=3)

    def f(q, p):
        x, y = (q - q0) / s, (p - p0) / s
        return (c[0] + c[1] * x + c[2] * y) * np.exp(-((q - q0) ** 2 + (p - p0) ** 2) / (2 * v))

    return f


def trace_check(count: int = 100, hbar: float = 1.0, seed: int = 20240917, n: int = 96, width: float = 12.0,
                N: int = 64, n_radial: int = 120) -> list[dict]:
    """Weyl trace pairing of random band-limited pairs against ``Tr(f^ rho^)`` from Fock matrices."""
    rng = np.random.default_rng(seed)
    grid = PhaseGrid.default(hbar, n=n, width=width)
    basis = FockBasis(N)
    rows = []
    for k in range(count):
        f, rho = _random_bump(rng, hbar), _random_bump(rng, hbar)
        pairing = grid.sample(f).pairing(grid.sample(rho))
        F = quantize_function(f, basis, hbar, n_radial=n_radial).entries
        R = quantize_function(rho, basis, hbar, n_radial=n_radial).entries
        oracle = complex(np.sum(F * R.T))
        rows.append({"index": k, "hbar": hbar, "pairing": complex(pairing), "oracle": oracle,
                     "rel_error": float(abs(pairing - oracle) / abs(oracle))})
    return rows
