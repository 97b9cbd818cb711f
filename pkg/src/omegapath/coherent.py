"""Coherent states, Wick symbols and the Gaussian time-sliced product integral.

One mode is ``z+ = sqrt(hbar) a^dagger``, ``z- = sqrt(hbar) a``.  The Wick
(normal) symbol of ``W`` is evaluated through unnormalized coherent vectors
``|v> = sum (v/sqrt(hbar))^n / sqrt(n!) |n>``:

    w(z+, z-) = exp(-z+ z-/hbar) <z+| W |z->,

where the bra is built from ``z+`` without conjugation.  The two arguments are
independent complex numbers, and ``(z+)^a (z-)^b`` is a fixed point for
``W = (z+^)^a (z-^)^b``.

Intermediate slice variables are distributed as ``xi = hbar zeta`` with
``zeta ~ gamma_hbar``, so ``E|xi|^2 = hbar``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammainc, gammaln, roots_hermite

from .phase_grid import AliasingError, Symbol, check_window
from .quantizer import FockBasis, OperatorMatrix, TruncationError, annihilation

CONVENTIONS = ("bargmann", "standard")
WICK_VARIANTS = ("hbar2", "hbar")
WICK_DEGREE_CAP = 8


class QuadratureError(ArithmeticError):
    """Gauss-Hermite result moved by more than the tolerance under point doubling."""


class MonteCarloError(ArithmeticError):
    """Monte Carlo standard error above the requested bound."""


# Fock space and coherent states


@dataclass(frozen=True)
class FockSpace:
    modes: int = 1
    N_levels: int = 64
    hbar: float = 1.0

    def __post_init__(self):
        if self.modes not in (1, 2):
            raise ValueError("only one or two modes are supported")
        if self.N_levels < 8:
            raise ValueError("keep at least 8 levels per mode")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def dim(self) -> int:
        return self.N_levels**self.modes

    def _embed(self, a: np.ndarray, mode: int) -> np.ndarray:
        if self.modes == 1:
            return a
        eye = np.eye(self.N_levels)
        return np.kron(a, eye) if mode == 0 else np.kron(eye, a)

    def zminus(self, mode: int = 0) -> np.ndarray:
        return self._embed(np.sqrt(self.hbar) * annihilation(self.N_levels), mode)

    def zplus(self, mode: int = 0) -> np.ndarray:
        return self._embed(np.sqrt(self.hbar) * annihilation(self.N_levels).T, mode)

    def ccr_defect(self, mode: int = 0, cut: int = 1) -> float:
        """Max deviation of ``[z-, z+] - hbar`` on the block that excludes the top ``cut`` levels per mode."""
        zm, zp = self.zminus(mode), self.zplus(mode)
        c = zm @ zp - zp @ zm - self.hbar * np.eye(self.dim)
        keep = np.ones(self.dim, dtype=bool)
        idx = np.indices((self.N_levels,) * self.modes).reshape(self.modes, -1)
        for k in range(self.modes):
            keep &= idx[k] < self.N_levels - cut
        return float(np.abs(c[np.ix_(keep, keep)]).max())


def _powers(u, N: int, hbar: float) -> np.ndarray:
    """Rows ``(u/sqrt(hbar))^n / sqrt(n!)`` for ``n < N``; shape ``u.shape + (N,)``."""
    u = np.asarray(u, dtype=complex) / np.sqrt(hbar)
    n = np.arange(N)
    mag = np.abs(u)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(n > 0, n * np.log(mag), 0.0) - 0.5 * gammaln(n + 1)
    out = np.exp(logs) * np.exp(1j * n * np.angle(u)[..., None])
    out[..., 0] = 1.0
    out[np.isnan(out)] = 0.0
    return out


def _amplitude(w: complex, convention: str, hbar: float) -> complex:
    # exp(-hbar w zeta) carries a sign and hbar in the exponent
    if convention == "bargmann":
        return -np.sqrt(hbar) * w
    if convention == "standard":
        return w / np.sqrt(hbar)
    raise ValueError(f"unknown coherent-state convention {convention!r}; choose from {CONVENTIONS}")


@dataclass(frozen=True, eq=False)
class CoherentState:
    """Unnormalized coherent vector, one complex amplitude per mode.

    ``bargmann``: ``e_w(zeta) = exp(-hbar w zeta)`` in the Bargmann space of
    ``gamma_hbar``; overlap ``exp(hbar conj(w) v)``.
    ``standard``: ``exp(w a^dagger / sqrt(hbar)) |0>``; overlap ``exp(conj(w) v / hbar)``.
    """

    w: np.ndarray
    norm_convention: str = "bargmann"

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=complex)))
        if self.norm_convention not in CONVENTIONS:
            raise ValueError(f"unknown coherent-state convention {self.norm_convention!r}")

    def alpha(self, hbar: float) -> np.ndarray:
        return np.array([_amplitude(x, self.norm_convention, hbar) for x in self.w])

    def vector(self, space: FockSpace) -> np.ndarray:
        if len(self.w) != space.modes:
            raise ValueError(f"state has {len(self.w)} amplitudes, space has {space.modes} modes")
        out = np.array([1.0 + 0j])
        for a in self.alpha(space.hbar):
            out = np.kron(out, _powers(a, space.N_levels, 1.0))
        return out

    def overlap(self, other: "CoherentState", hbar: float) -> complex:
        """Closed-form ``<self, other>``."""
        if self.norm_convention != other.norm_convention:
            raise ValueError("overlap of states in different conventions")
        s = np.sum(np.conj(self.w) * other.w)
        return complex(np.exp(hbar * s if self.norm_convention == "bargmann" else s / hbar))

    def truncation_tail(self, space: FockSpace) -> float:
        """Fraction of the squared norm beyond the top level, over all modes."""
        x = np.abs(self.alpha(space.hbar)) ** 2
        # P(N, x) is the Poisson(x) mass at levels >= N
        kept = np.prod([1.0 - gammainc(space.N_levels, xi) if xi > 0 else 1.0 for xi in x])
        return float(1.0 - kept)


def overlap_defect(u: CoherentState, v: CoherentState, space: FockSpace) -> float:
    """Relative gap between the truncated inner product and the closed form."""
    exact = u.overlap(v, space.hbar)
    approx = np.vdot(u.vector(space), v.vector(space))
    return float(abs(approx - exact) / abs(exact))


# Gaussian measure


@dataclass
class MomentTable:
    hbar: float
    closed_form: np.ndarray
    quadrature: np.ndarray

    @property
    def discrepancy(self) -> float:
        return float(np.abs(self.closed_form - self.quadrature).max())

    def moment(self, a: int, b: int) -> complex:
        return complex(self.closed_form[a, b])


def gaussian_measure_moments(order: int, hbar: float = 1.0, points: int = 16, tol: float = 1e-8) -> MomentTable:
    """``E[zeta^a conj(zeta)^b]`` for ``a, b <= order`` under ``gamma_hbar`` (``E|zeta|^2 = 1/hbar``)."""
    if not 0 <= order <= 8:
        raise ValueError("moment order must lie in 0..8")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    closed = np.zeros((order + 1, order + 1), dtype=complex)
    for a in range(order + 1):
        closed[a, a] = factorial(a) / hbar**a
    x, w = roots_hermite(points)
    X, Y = np.meshgrid(x, x, indexing="ij")
    zeta = ((X + 1j * Y) / np.sqrt(hbar)).ravel()
    wt = (np.outer(w, w) / np.pi).ravel()
    quad = np.array([[np.sum(wt * zeta**a * np.conj(zeta) ** b) for b in range(order + 1)]
                     for a in range(order + 1)])
    table = MomentTable(hbar, closed, quad)
    scale = max(1.0, float(np.abs(closed).max()))
    if table.discrepancy > tol * scale:
        raise ArithmeticError(f"moment quadrature disagrees with the closed form by {table.discrepancy:.2e}")
    return table


def characteristic_function(z, hbar: float = 1.0) -> np.ndarray:
    """``E exp(i Re(z conj(zeta)))`` under ``gamma_hbar``; equals ``exp(-z+ z-/2 hbar)`` with ``z+ z- = |z|^2/2``."""
    z = np.asarray(z, dtype=complex)
    return np.exp(-np.abs(z) ** 2 / (4.0 * hbar))


# Wick symbols


@dataclass(frozen=True, eq=False)
class WickSymbol:
    """Normal symbol ``w(z+, z-)`` from a Fock matrix, a polynomial record or a callable.

    ``poly[a, b]`` is the coefficient of ``(z+)^a (z-)^b``.
    """

    hbar: float = 1.0
    matrix: np.ndarray | None = None
    poly: np.ndarray | None = None
    func: Callable | None = None
    label: str = ""

    def __post_init__(self):
        given = [x is not None for x in (self.matrix, self.poly, self.func)]
        if sum(given) != 1:
            raise ValueError("give exactly one of matrix, poly, func")
        if self.poly is not None:
            c = np.atleast_2d(np.asarray(self.poly, dtype=complex))
            nz = np.argwhere(c != 0)
            if len(nz) and nz.sum(axis=1).max() > WICK_DEGREE_CAP:
                raise ValueError(f"polynomial degree exceeds the cap {WICK_DEGREE_CAP}")
            object.__setattr__(self, "poly", c)
        if self.matrix is not None:
            object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @classmethod
    def monomial(cls, a: int, b: int, hbar: float = 1.0, coeff: complex = 1.0) -> "WickSymbol":
        c = np.zeros((a + 1, b + 1), dtype=complex)
        c[a, b] = coeff
        return cls(hbar, poly=c, label=f"z+^{a} z-^{b}")

    @property
    def levels(self) -> int | None:
        return None if self.matrix is None else self.matrix.shape[0]

    def kernel(self, zp, zm) -> np.ndarray:
        """``exp(z+ z-/hbar) w(z+, z-)``, broadcasting ``zp`` against ``zm``."""
        zp, zm = np.broadcast_arrays(np.asarray(zp, dtype=complex), np.asarray(zm, dtype=complex))
        if self.matrix is not None:
            N = self.levels
            return np.sum((_powers(zp, N, self.hbar) @ self.matrix) * _powers(zm, N, self.hbar), axis=-1)
        return np.exp(zp * zm / self.hbar) * self._direct(zp, zm)

    def kernel_matrix(self, zp: np.ndarray, zm: np.ndarray) -> np.ndarray:
        """``kernel(zp[i], zm[j])`` as a matrix over two point lists."""
        zp, zm = np.ravel(zp), np.ravel(zm)
        if self.matrix is not None:
            N = self.levels
            return _powers(zp, N, self.hbar) @ self.matrix @ _powers(zm, N, self.hbar).T
        return self.kernel(zp[:, None], zm[None, :])

    def _direct(self, zp, zm):
        if self.poly is not None:
            out = np.zeros(np.broadcast(zp, zm).shape, dtype=complex)
            for a, b in np.argwhere(self.poly != 0):
                out = out + self.poly[a, b] * zp**a * zm**b
            return out
        return np.asarray(self.func(zp, zm), dtype=complex)

    def __call__(self, zp, zm, check: bool = True, tol: float = 1e-8):
        zp, zm = np.broadcast_arrays(np.asarray(zp, dtype=complex), np.asarray(zm, dtype=complex))
        if self.matrix is None:
            return self._direct(zp, zm)
        if check:
            worst = truncation_tail(np.concatenate([np.ravel(zp), np.ravel(zm)]), self.levels, self.hbar)
            if worst > tol:
                raise TruncationError(f"coherent vector tail {worst:.2e} of its norm beyond {self.levels} levels")
        return np.exp(-zp * zm / self.hbar) * self.kernel(zp, zm)

    def to_operator(self, basis: FockBasis) -> OperatorMatrix:
        """``sum w[a, b] (z+^)^a (z-^)^b`` in the truncated Fock basis."""
        if self.matrix is not None:
            if self.levels != basis.N:
                raise ValueError("basis size differs from the stored matrix")
            return OperatorMatrix(basis, self.matrix, self.hbar)
        if self.poly is None:
            raise ValueError("only matrix and polynomial Wick symbols can be quantized")
        a = np.sqrt(self.hbar) * annihilation(basis.N)
        out = np.zeros((basis.N, basis.N), dtype=complex)
        for i, j in np.argwhere(self.poly != 0):
            out += self.poly[i, j] * np.linalg.matrix_power(a.T, i) @ np.linalg.matrix_power(a, j)
        return OperatorMatrix(basis, out, self.hbar)


def truncation_tail(z, N: int, hbar: float) -> float:
    """Largest fraction of a coherent vector's squared norm beyond level ``N`` over the points ``z``."""
    x = np.abs(np.ravel(np.asarray(z, dtype=complex))) ** 2 / hbar
    if x.size == 0:
        return 0.0
    return float(np.max(np.where(x > 0, gammainc(N, np.maximum(x, 1e-300)), 0.0)))


def wick_symbol_of(W, hbar: float | None = None) -> WickSymbol:
    """Normal symbol of a Fock-basis operator."""
    if isinstance(W, OperatorMatrix):
        return WickSymbol(W.hbar if hbar is None else hbar, matrix=W.entries)
    return WickSymbol(1.0 if hbar is None else hbar, matrix=np.asarray(W, dtype=complex))


# Weyl <-> Wick


def _heat_exponent(variant: str, hbar: float) -> float:
    if variant == "hbar2":
        return hbar**2 / 2.0
    if variant == "hbar":
        return -hbar / 2.0
    raise ValueError(f"unknown conversion variant {variant!r}; choose from {WICK_VARIANTS}")


def _heat_poly(c: np.ndarray, kappa: float) -> np.ndarray:
    """``exp(kappa d+ d-)`` on coefficients of ``(z+)^a (z-)^b``."""
    A, B = c.shape
    out = np.zeros_like(c)
    for a in range(A):
        for b in range(B):
            k = 0
            while a + k < A and b + k < B:
                if c[a + k, b + k] != 0:
                    ways = factorial(a + k) // factorial(a) * factorial(b + k) // factorial(b)
                    out[a, b] += kappa**k / factorial(k) * ways * c[a + k, b + k]
                k += 1
    return out


def weyl_wick_convert(f, direction: str = "wick_to_weyl", variant: str = "hbar2", hbar: float | None = None,
                      noise_floor: float = 64 * np.finfo(float).eps):
    """Map between Wick and Weyl symbols by the heat flow ``exp(kappa d+ d-)``.

    ``variant="hbar2"`` uses ``kappa = hbar^2/2``;
    ``variant="hbar"`` uses ``kappa = -hbar/2``, the value the Fock matrix
    oracle selects (see :func:`wick_variant_check`).  ``wick_to_weyl`` applies
    ``exp(kappa d+ d-)``, ``weyl_to_wick`` its inverse.

    ``f`` is a polynomial record (coefficient array, or a polynomial
    :class:`WickSymbol`) or a band-limited grid :class:`Symbol` in (q, p),
    where ``d+ d- = (d_q^2 + d_p^2)/2``.
    """
    if direction not in ("wick_to_weyl", "weyl_to_wick"):
        raise ValueError("direction must be 'wick_to_weyl' or 'weyl_to_wick'")
    if isinstance(f, Symbol):
        h = f.grid.hbar if hbar is None else hbar
        kappa = _heat_exponent(variant, h) * (1 if direction == "wick_to_weyl" else -1)
        return _heat_grid(f, kappa, noise_floor)
    if isinstance(f, WickSymbol):
        if f.poly is None:
            raise ValueError("only polynomial Wick symbols convert exactly")
        h = f.hbar if hbar is None else hbar
        kappa = _heat_exponent(variant, h) * (1 if direction == "wick_to_weyl" else -1)
        return WickSymbol(h, poly=_heat_poly(f.poly, kappa), label=f.label)
    c = np.atleast_2d(np.asarray(f, dtype=complex))
    nz = np.argwhere(c != 0)
    if len(nz) and nz.sum(axis=1).max() > WICK_DEGREE_CAP:
        raise ValueError(f"polynomial degree exceeds the cap {WICK_DEGREE_CAP}")
    h = 1.0 if hbar is None else hbar
    kappa = _heat_exponent(variant, h) * (1 if direction == "wick_to_weyl" else -1)
    return _heat_poly(c, kappa)


def _heat_grid(f: Symbol, kappa: float, noise_floor: float) -> Symbol:
    g = f.grid
    if g.d != 1 or f.domain != "phase":
        raise ValueError("grid heat flow supports phase-domain symbols with d = 1")
    check_window(f)
    kq = 2 * np.pi * np.fft.fftfreq(g.n_q, d=g.dq)
    kp = 2 * np.pi * np.fft.fftfreq(g.n_p, d=g.dp)
    mult = np.exp(-kappa * (kq[:, None] ** 2 + kp[None, :] ** 2) / 2.0)
    F = np.fft.fft2(np.fft.ifftshift(f.values))
    amp = mult > 1.0
    if np.any(amp):
        peak = np.abs(F).max()
        noise = amp & (np.abs(F) <= noise_floor * peak)
        F = np.where(noise, 0.0, F)
        if np.any(np.abs(F * mult)[amp] > 1e3 * peak):
            raise AliasingError("inverse heat flow amplifies frequencies beyond the grid bandwidth")
    out = np.fft.fftshift(np.fft.ifft2(F * mult))
    return f.replace(values=out)


def wick_variant_check(hbar: float = 1.0, N: int = 64) -> dict:
    """Which conversion variant maps ``z+ z-`` and ``(z+ z-)^2`` to the Weyl symbols of their Fock operators.

    Returns the max coefficient error per variant; the Weyl oracle is the exact
    polynomial dequantization of the normal-ordered operator.
    """
    from .polynomial import PolySymbol, convert_poly

    out = {}
    for variant in WICK_VARIANTS:
        err = 0.0
        for k in (1, 2):
            w = np.zeros((k + 1, k + 1), dtype=complex)
            w[k, k] = 1.0
            f = weyl_wick_convert(w, "wick_to_weyl", variant, hbar)
            oracle = convert_poly(PolySymbol.from_ladder(w, hbar, "normal"), "weyl").to_ladder()
            n = max(f.shape[0], oracle.shape[0])
            a = np.zeros((n, n), dtype=complex)
            b = np.zeros((n, n), dtype=complex)
            a[: f.shape[0], : f.shape[1]] = f
            b[: oracle.shape[0], : oracle.shape[1]] = oracle
            err = max(err, float(np.abs(a - b).max()))
        out[variant] = err
    return out


# product integral


@dataclass
class PathIntegralResult:
    N_slices: int
    zp: np.ndarray
    zm: np.ndarray
    values: np.ndarray
    error_estimate: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for a, b, v, e in zip(self.zp, self.zm, self.values, self.error_estimate):
            out.append({"N_slices": self.N_slices, "z_plus": complex(a), "z_minus": complex(b),
                        "value": complex(v), "error_estimate": float(e)})
        return out


def _probes(zp, zm):
    zp, zm = np.broadcast_arrays(np.atleast_1d(np.asarray(zp, dtype=complex)),
                                 np.atleast_1d(np.asarray(zm, dtype=complex)))
    return zp.ravel(), zm.ravel()


def _gh_nodes(points: int, hbar: float):
    x, w = roots_hermite(points)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.sqrt(hbar) * (X + 1j * Y).ravel(), (np.outer(w, w) / np.pi).ravel()


def _chain_quadrature(w_list: Sequence[WickSymbol], zp, zm, points: int, hbar: float) -> np.ndarray:
    xi, wt = _gh_nodes(points, hbar)
    vec = w_list[0].kernel_matrix(zp, xi) * wt
    for wj in w_list[1:-1]:
        vec = (vec @ wj.kernel_matrix(np.conj(xi), xi)) * wt
    last = w_list[-1].kernel_matrix(np.conj(xi), zm)
    return np.exp(-zp * zm / hbar) * np.einsum("pi,ip->p", vec, last)


def _free_chain_gaussian(M: int):
    """Precision matrix of the modulus of the free chain integrand, per real axis."""
    A = 2.0 * np.eye(M) - np.eye(M, k=1) - np.eye(M, k=-1)
    return A, np.linalg.cholesky(A)


def _trim_levels(w: WickSymbol, reach: float, tail: float = 1e-17) -> WickSymbol:
    """Drop Fock levels no coherent vector of modulus <= ``reach`` populates above ``tail``."""
    if w.matrix is None:
        return w
    x = reach**2 / w.hbar
    L = w.levels
    while L > 8 and gammainc(L - 8, x) < tail:
        L -= 8
    return w if L == w.levels else WickSymbol(w.hbar, matrix=w.matrix[:L, :L], label=w.label)


def _chain_monte_carlo(w_list, zp, zm, samples: int, seed: int, batches: int, hbar: float):
    """Importance sampling from the Gaussian modulus of the free (identity) chain; phases ride on the weights."""
    M = len(w_list) - 1
    s = np.sqrt(hbar)
    A, L = _free_chain_gaussian(M)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    rng = np.random.default_rng(seed)
    vals, errs = [], []
    for a, b in zip(zp / s, zm / s):
        bx = np.zeros(M)
        by = np.zeros(M)
        bx[0] += a.real
        by[0] -= a.imag
        bx[-1] += b.real
        by[-1] += b.imag
        mx, my = np.linalg.solve(A, bx), np.linalg.solve(A, by)
        ex = np.linalg.solve(L.T, rng.standard_normal((M, samples))).T
        ey = np.linalg.solve(L.T, rng.standard_normal((M, samples))).T
        x, y = mx + ex, my + ey
        # log of the sampling density over both real axes
        logg = -0.5 * (np.einsum("si,ij,sj->s", ex, A, ex) + np.einsum("si,ij,sj->s", ey, A, ey))
        logg += logdet - M * np.log(2 * np.pi)
        xi = s * (x + 1j * y)
        reach = max(float(np.abs(xi).max()), abs(a) * s, abs(b) * s)
        w_list = [_trim_levels(w, reach) for w in w_list]
        prod = w_list[0].kernel(a * s, xi[:, 0])
        for j in range(1, M):
            prod = prod * w_list[j].kernel(np.conj(xi[:, j - 1]), xi[:, j])
        prod = prod * w_list[-1].kernel(np.conj(xi[:, -1]), b * s)
        logw = -M * np.log(np.pi) - np.sum(x * x + y * y, axis=1) - logg
        est = np.exp(-a * b) * prod * np.exp(logw)
        means = np.array([c.mean() for c in np.array_split(est, batches)])
        vals.append(means.mean())
        dev = np.abs(means - means.mean()) ** 2
        errs.append(np.sqrt(dev.sum() / (batches - 1) / batches) if batches > 1 else np.nan)
    return np.array(vals), np.array(errs)


def normal_product_integral(w_list: Sequence[WickSymbol], zp, zm, method: str = "gauss_hermite", points: int = 24,
                            samples: int = 200_000, seed: int = 20240917, batches: int = 20,
                            tol: float = 1e-6, se_bound: float | None = None) -> PathIntegralResult:
    """Normal symbol of ``W_1 W_2 ... W_N`` at the probes ``(zp, zm)`` as a Gaussian multiple integral.

    ``gauss_hermite`` uses a tensor rule with ``points`` per real axis for each
    intermediate variable, contracted slice by slice; the result is repeated
    with doubled points and the change is the error estimate.
    ``monte_carlo`` samples the chain with batch-mean standard errors.
    """
    w_list = list(w_list)
    if not w_list:
        raise ValueError("need at least one factor")
    hbar = w_list[0].hbar
    if any(abs(w.hbar - hbar) > 0 for w in w_list):
        raise ValueError("factors carry different hbar")
    zp, zm = _probes(zp, zm)
    N = len(w_list)
    if N == 1:
        v = w_list[0](zp, zm, check=False)
        return PathIntegralResult(1, zp, zm, v, np.zeros(len(zp)), "direct")
    if method == "gauss_hermite":
        if N > 16:
            raise ValueError("tensor Gauss-Hermite is limited to 16 slices; use monte_carlo")
        v = _chain_quadrature(w_list, zp, zm, points, hbar)
        v2 = _chain_quadrature(w_list, zp, zm, 2 * points, hbar)
        change = np.abs(v2 - v)
        rel = change / np.maximum(np.abs(v2), 1.0)
        if np.any(rel > tol):
            raise QuadratureError(f"point doubling {points} -> {2 * points} moved the result by {rel.max():.2e}")
        return PathIntegralResult(N, zp, zm, v, change, "gauss_hermite", {"points": points})
    if method == "monte_carlo":
        v, se = _chain_monte_carlo(w_list, zp, zm, samples, seed, batches, hbar)
        if se_bound is not None and np.any(se > se_bound):
            raise MonteCarloError(f"standard error {se.max():.2e} above the bound {se_bound:g}")
        return PathIntegralResult(N, zp, zm, v, se, "monte_carlo", {"samples": samples, "seed": seed,
                                                                    "batches": batches})
    raise ValueError(f"unknown method {method!r}; choose gauss_hermite or monte_carlo")


def resolvent_slices(H, P, hbar: float = 1.0, levels: int = 160) -> list[WickSymbol]:
    """Wick symbols of the backward-Euler factors, leftmost (latest) first."""
    from .evolution import _factor

    basis = FockBasis(levels)
    out = []
    for j, dt in enumerate(P.dts):
        F = _factor(H, P.knots[j + 1], dt, "backward_operator", basis, hbar, "weyl", 0)
        out.append(WickSymbol(hbar, matrix=F, label=f"slice {j}"))
    return out[::-1]


def coherent_path_integral(H, P, zp, zm, method: str = "gauss_hermite", hbar: float = 1.0, levels: int = 160,
                           **kwargs) -> PathIntegralResult:
    """Time-sliced coherent-state path integral ``u^P(z+, z-)`` over backward-Euler slices."""
    res = normal_product_integral(resolvent_slices(H, P, hbar, levels), zp, zm, method, **kwargs)
    res.meta.update({"hamiltonian": H.name, "steps": P.steps, "levels": levels, "convention": "bargmann"})
    return res


def write_path_csv(results: Sequence[PathIntegralResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N_slices", "z_plus_re", "z_plus_im", "z_minus_re", "z_minus_im", "value_re", "value_im",
                    "error_estimate"])
        for res in results:
            for r in res.rows():
                w.writerow([r["N_slices"]] + ["%.17g" % x for x in (
                    r["z_plus"].real, r["z_plus"].imag, r["z_minus"].real, r["z_minus"].imag,
                    r["value"].real, r["value"].imag, r["error_estimate"])])
