"""Discretized flat phase space and the hbar-symplectic Fourier transform.

Conventions used throughout the package:

* complex coordinates ``z+ = (q + i p)/sqrt(2)``, ``z- = (q - i p)/sqrt(2)``;
* Liouville measure ``d lambda = (2 pi hbar)^-d dq dp`` (the ``(pi hbar)^-d dz+ dz-``
  form agrees once ``dz+ dz-`` is read as Lebesgue measure on the complex plane
  of ``z+``);
* symplectic form ``sigma(z, w) = p_z q_w - p_w q_z`` and Fourier kernel
  ``exp((i/hbar) sigma(z, zeta))``.

With that kernel the transform is an involution up to the sign of the
exponent, so the inverse uses ``exp(-(i/hbar) sigma(z, zeta))`` with the same
Liouville normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "AliasingError",
    "PhasePoint",
    "PhaseGrid",
    "Symbol",
    "symplectic_form",
    "complex_symplectic_form",
    "symplectic_fourier",
    "inverse_symplectic_fourier",
]

PHASE = "phase"
FREQUENCY = "frequency"


class AliasingError(ValueError):
    """Raised when a symbol is not resolved by its grid window."""


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape:
            raise ValueError(f"q and p must have equal length, got {q.shape} and {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return self.q.shape[0]

    @property
    def zplus(self) -> np.ndarray:
        return (self.q + 1j * self.p) / np.sqrt(2.0)

    @property
    def zminus(self) -> np.ndarray:
        return (self.q - 1j * self.p) / np.sqrt(2.0)

    @classmethod
    def from_complex(cls, zplus, zminus) -> "PhasePoint":
        zplus = np.atleast_1d(np.asarray(zplus, dtype=complex))
        zminus = np.atleast_1d(np.asarray(zminus, dtype=complex))
        q = (zplus + zminus) / np.sqrt(2.0)
        p = (zplus - zminus) / (1j * np.sqrt(2.0))
        return cls(q.real, p.real)


def complex_symplectic_form(z1: PhasePoint, z2: PhasePoint) -> float:
    """``(1/i)(z1+ . z2- - z1- . z2+)``; real for real phase points."""
    if z1.d != z2.d:
        raise ValueError(f"dimension mismatch: {z1.d} != {z2.d}")
    val = (np.dot(z1.zplus, z2.zminus) - np.dot(z1.zminus, z2.zplus)) / 1j
    return float(val.real)


def symplectic_form(z1: PhasePoint, z2: PhasePoint) -> float:
    """Standard symplectic form ``p1.q2 - p2.q1``.

    The value is cross-checked against the complex-coordinate expression.
    """
    if z1.d != z2.d:
        raise ValueError(f"dimension mismatch: {z1.d} != {z2.d}")
    val = float(np.dot(z1.p, z2.q) - np.dot(z2.p, z1.q))
    alt = complex_symplectic_form(z1, z2)
    scale = 1.0 + abs(val)
    assert abs(val - alt) <= 1e-12 * scale, (val, alt)
    return val


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform lattice on ``[-L_q, L_q)^d x [-L_p, L_p)^d`` centered at the origin.

    Phase-domain arrays have shape ``(n_q,)*d + (n_p,)*d`` (q axes first).
    Frequency-domain arrays have shape ``(n_p,)*d + (n_q,)*d``: the first
    axes carry ``zeta_q`` (conjugate to p), the last carry ``zeta_p``.
    """

    n_q: int = 128
    n_p: int = 128
    L_q: float = 8.0
    L_p: float = 8.0
    hbar: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        for name in ("n_q", "n_p"):
            n = getattr(self, name)
            if n < 8 or n % 2:
                raise ValueError(f"{name} must be even and >= 8, got {n}")
        if self.L_q <= 0 or self.L_p <= 0:
            raise ValueError("half-widths must be positive")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")

    @classmethod
    def default(cls, hbar: float = 1.0, n: int = 128, width: float = 8.0, d: int = 1) -> "PhaseGrid":
        """Square grid with half-width ``width * sqrt(hbar)`` on both axes."""
        L = width * np.sqrt(hbar)
        return cls(n_q=n, n_p=n, L_q=L, L_p=L, hbar=hbar, d=d)

    # lattice geometry

    @property
    def dq(self) -> float:
        return 2.0 * self.L_q / self.n_q

    @property
    def dp(self) -> float:
        return 2.0 * self.L_p / self.n_p

    @property
    def q(self) -> np.ndarray:
        return self.dq * (np.arange(self.n_q) - self.n_q // 2)

    @property
    def p(self) -> np.ndarray:
        return self.dp * (np.arange(self.n_p) - self.n_p // 2)

    @property
    def zeta_q(self) -> np.ndarray:
        """Dual lattice for the frequency conjugate to p."""
        return self.hbar * np.pi / self.L_p * (np.arange(self.n_p) - self.n_p // 2)

    @property
    def zeta_p(self) -> np.ndarray:
        return self.hbar * np.pi / self.L_q * (np.arange(self.n_q) - self.n_q // 2)

    @property
    def dzeta_q(self) -> float:
        return self.hbar * np.pi / self.L_p

    @property
    def dzeta_p(self) -> float:
        return self.hbar * np.pi / self.L_q

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_q,) * self.d + (self.n_p,) * self.d

    @property
    def frequency_shape(self) -> tuple[int, ...]:
        return (self.n_p,) * self.d + (self.n_q,) * self.d

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return (self.dq * self.dp) ** self.d

    @property
    def liouville_weight(self) -> float:
        """Liouville measure of one phase cell, ``(dq dp / 2 pi hbar)^d``."""
        return (self.dq * self.dp / (2.0 * np.pi * self.hbar)) ** self.d

    @property
    def dual_liouville_weight(self) -> float:
        return (self.dzeta_q * self.dzeta_p / (2.0 * np.pi * self.hbar)) ** self.d

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays (q, p) over the phase lattice.

        For ``d == 1`` both have shape ``(n_q, n_p)``; for ``d == 2`` they have
        a leading axis of length 2.
        """
        axes = [self.q] * self.d + [self.p] * self.d
        grids = np.meshgrid(*axes, indexing="ij")
        q = np.stack(grids[: self.d])
        p = np.stack(grids[self.d:])
        if self.d == 1:
            return q[0], p[0]
        return q, p

    def frequency_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        axes = [self.zeta_q] * self.d + [self.zeta_p] * self.d
        grids = np.meshgrid(*axes, indexing="ij")
        zq = np.stack(grids[: self.d])
        zp = np.stack(grids[self.d:])
        if self.d == 1:
            return zq[0], zp[0]
        return zq, zp

    def interior_mask(self, fraction: float = 0.5) -> np.ndarray:
        """Cells inside the central sub-window covering ``fraction`` of each axis."""
        q, p = self.mesh()
        if self.d == 1:
            q, p = q[None], p[None]
        mask = np.ones(self.shape, dtype=bool)
        for k in range(self.d):
            mask &= np.abs(q[k]) <= fraction * self.L_q
            mask &= np.abs(p[k]) <= fraction * self.L_p
        return mask

    def shell_mask(self, shape: tuple[int, ...], width: float) -> np.ndarray:
        """Cells whose centered index lies in the outer ``width`` fraction of any axis."""
        mask = np.zeros(shape, dtype=bool)
        for axis, n in enumerate(shape):
            idx = np.abs(np.arange(n) - n // 2) / (n // 2)
            sl = [None] * len(shape)
            sl[axis] = slice(None)
            mask |= (idx > 1.0 - width)[tuple(sl)]
        return mask

    def sample(self, func: Callable, ordering: str = "weyl") -> "Symbol":
        q, p = self.mesh()
        values = np.asarray(func(q, p), dtype=complex)
        values = np.broadcast_to(values, self.shape).copy()
        return Symbol(self, values, ordering=ordering)


@dataclass(frozen=True, eq=False)
class Symbol:
    grid: PhaseGrid
    values: np.ndarray
    ordering: str = "weyl"
    domain: str = PHASE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        expected = self.grid.shape if self.domain == PHASE else self.grid.frequency_shape
        if self.domain not in (PHASE, FREQUENCY):
            raise ValueError(f"unknown domain {self.domain!r}")
        if values.shape != expected:
            raise ValueError(f"values shape {values.shape} does not match grid {expected}")
        object.__setattr__(self, "values", values)

    def replace(self, values=None, ordering=None, domain=None) -> "Symbol":
        return Symbol(
            self.grid,
            self.values if values is None else values,
            ordering=self.ordering if ordering is None else ordering,
            domain=self.domain if domain is None else domain,
        )

    def __add__(self, other):
        if isinstance(other, Symbol):
            _check_compatible(self, other)
            return self.replace(self.values + other.values)
        return self.replace(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Symbol):
            _check_compatible(self, other)
            return self.replace(self.values - other.values)
        return self.replace(self.values - other)

    def __mul__(self, scalar):
        return self.replace(self.values * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        """L2 norm with respect to the Liouville measure (or its dual)."""
        w = self.grid.liouville_weight if self.domain == PHASE else self.grid.dual_liouville_weight
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def pairing(self, other: "Symbol") -> complex:
        """Bilinear pairing ``sum f g dlambda`` (no conjugation)."""
        _check_compatible(self, other)
        return complex(np.sum(self.values * other.values) * self.grid.liouville_weight)


def _check_compatible(a: Symbol, b: Symbol):
    if a.grid != b.grid:
        raise ValueError("symbols live on different grids")
    if a.domain != b.domain:
        raise ValueError("symbols live in different domains")


def _cfft(x, axes):
    return np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(x, axes=axes), axes=axes), axes=axes)


def _cifft_unnormalized(x, axes):
    n = np.prod([x.shape[a] for a in axes])
    return n * np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(x, axes=axes), axes=axes), axes=axes)


def check_window(f: Symbol, tol: float = 1e-8, shell: float = 0.05):
    """Raise AliasingError if the phase symbol is not negligible at the window edge."""
    vals = np.abs(f.values)
    peak = vals.max()
    if peak == 0.0 or np.ptp(vals) <= tol * peak:
        return  # zero or constant: the transform is an exact lattice delta
    edge = vals[f.grid.shell_mask(vals.shape, shell)].max()
    if edge > tol * peak:
        raise AliasingError(
            f"symbol reaches {edge / peak:.2e} of its peak at the window boundary (limit {tol:g})"
        )


def check_bandwidth(g: Symbol, limit: float = 0.01, shell: float = 0.10):
    """Raise AliasingError if more than ``limit`` of the spectral energy sits in the outer shell."""
    energy = np.abs(g.values) ** 2
    total = energy.sum()
    if total == 0.0:
        return
    outer = energy[g.grid.shell_mask(energy.shape, shell)].sum()
    if outer > limit * total:
        raise AliasingError(
            f"{outer / total:.2%} of the spectral energy lies in the outer {shell:.0%} shell"
        )


def symplectic_fourier(f: Symbol, check: bool = True) -> Symbol:
    """hbar-symplectic Fourier transform realized as a centered FFT.

    ``f~(zeta) = sum_z f(z) exp((i/hbar)(p_z zeta_q - q_z zeta_p)) dlambda(z)``.
    """
    if f.domain != PHASE:
        raise ValueError("symplectic_fourier expects a phase-domain symbol")
    grid = f.grid
    d = grid.d
    if check:
        check_window(f)
    q_axes = tuple(range(d))
    p_axes = tuple(range(d, 2 * d))
    flat = f.values.ravel()
    if np.all(flat == flat[0]):
        # a constant is an exact lattice delta; the FFT would leave ~eps residues
        out = np.zeros(grid.frequency_shape, dtype=complex)
        out[tuple(n // 2 for n in grid.frequency_shape)] = flat[0] * flat.size * grid.liouville_weight
        return Symbol(grid, out, ordering=f.ordering, domain=FREQUENCY)
    # exp(-i q zeta_p / hbar) along q, exp(+i p zeta_q / hbar) along p
    out = _cfft(f.values, q_axes)
    out = _cifft_unnormalized(out, p_axes)
    out = np.moveaxis(out, p_axes, tuple(range(d)))
    out *= grid.liouville_weight
    g = Symbol(grid, out, ordering=f.ordering, domain=FREQUENCY)
    if check:
        check_bandwidth(g)
    return g


def inverse_symplectic_fourier(g: Symbol, check: bool = False) -> Symbol:
    """Inverse of :func:`symplectic_fourier`; kernel ``exp(-(i/hbar) sigma(z, zeta))``."""
    if g.domain != FREQUENCY:
        raise ValueError("inverse_symplectic_fourier expects a frequency-domain symbol")
    grid = g.grid
    d = grid.d
    if check:
        check_bandwidth(g)
    vals = np.moveaxis(g.values, tuple(range(d)), tuple(range(d, 2 * d)))
    q_axes = tuple(range(d))
    p_axes = tuple(range(d, 2 * d))
    out = _cifft_unnormalized(vals, q_axes)
    out = _cfft(out, p_axes)
    out *= grid.dual_liouville_weight
    return Symbol(grid, out, ordering=g.ordering, domain=PHASE)


def direct_symplectic_fourier(f: Symbol) -> np.ndarray:
    """Riemann sum of the defining integral with explicit exponentials (d = 1 only)."""
    grid = f.grid
    if grid.d != 1:
        raise ValueError("direct evaluation is implemented for d = 1")
    eq = np.exp(-1j * np.outer(grid.q, grid.zeta_p) / grid.hbar)  # (n_q, n_zp)
    ep = np.exp(1j * np.outer(grid.p, grid.zeta_q) / grid.hbar)  # (n_p, n_zq)
    return ep.T @ f.values.T @ eq * grid.liouville_weight
