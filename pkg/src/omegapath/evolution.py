"""Time partitions, Euler product integrals and convergence studies.

Hamiltonians are Weyl symbols ``f(t, q, p)``; the generator of the evolution
is ``(i/hbar) f^``.  The backward (implicit) Euler factor over a step is the
resolvent ``(1 + (i dt/hbar) f^)^-1``; the time-sliced path-integral version
quantizes the resolvent *symbol* ``(1 + (i dt/hbar) f)^-1`` instead.

Errors of operator products are measured on the leading ``block`` Fock levels:
levels with ``dt E / hbar`` of order one are outside the asymptotic regime for
any mesh in a desk-scale study, and the truncated basis corrupts the last few
levels anyway.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .omega import as_rule, estimate_order
from .phase_grid import PhaseGrid, Symbol
from .polynomial import PolySymbol
from .quantizer import FockBasis, OperatorMatrix, quantize_function, quantize_poly

DEFAULT_BLOCK = 4


class SingularResolvent(ArithmeticError):
    """``1 + dt A`` is singular: the step violates aptness at this truncation."""


# partitions


@dataclass(frozen=True, eq=False)
class Partition:
    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or len(k) < 2:
            raise ValueError("a partition needs at least two knots")
        if not np.all(np.diff(k) > 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)

    @classmethod
    def uniform(cls, t_start: float, t_end: float, steps: int) -> "Partition":
        if steps < 1:
            raise ValueError("steps must be positive")
        return cls(np.linspace(t_start, t_end, steps + 1))

    @classmethod
    def from_mesh(cls, t_start: float, t_end: float, mesh: float) -> "Partition":
        # round up so the realized mesh never exceeds the request; the slack absorbs 1/2^k ratios
        return cls.uniform(t_start, t_end, max(1, int(np.ceil((t_end - t_start) / mesh - 1e-9))))

    @property
    def t_start(self) -> float:
        return float(self.knots[0])

    @property
    def t_end(self) -> float:
        return float(self.knots[-1])

    @property
    def steps(self) -> int:
        return len(self.knots) - 1

    @property
    def dts(self) -> np.ndarray:
        return np.diff(self.knots)

    @property
    def mesh(self) -> float:
        return float(self.dts.max())

    @property
    def is_uniform(self) -> bool:
        d = self.dts
        # linspace knots carry rounding of order eps * steps relative to the step
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0))


# hamiltonians


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Polynomial Weyl symbol ``f(t, q, p) = sum c[n, m](t) q^n p^m``."""

    name: str
    coeffs: Callable[[float], np.ndarray]
    time_dependent: bool = False
    delta: float = 0.0
    description: str = ""
    expectation: str = ""

    def poly_at(self, t: float = 0.0, hbar: float = 1.0) -> PolySymbol:
        return PolySymbol(self.coeffs(t), hbar, "weyl")

    def func(self, q, p, t: float = 0.0):
        return self.poly_at(t)(q, p)

    def symbol_at(self, t: float, grid: PhaseGrid) -> Symbol:
        return grid.sample(lambda q, p: self.func(q, p, t))

    def operator_at(self, t: float, basis, hbar: float) -> OperatorMatrix:
        return quantize_poly(self.poly_at(t, hbar), basis)

    @classmethod
    def from_coefficients(cls, name: str, coeffs, delta: float = 0.0) -> "Hamiltonian":
        c = np.array(coeffs, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        return cls(name, lambda t, c=c: c, False, delta, "user polynomial")


def _c(entries: dict, scale: complex = 1.0) -> np.ndarray:
    deg = max(n + m for n, m in entries)
    out = np.zeros((deg + 1, deg + 1), dtype=complex)
    for (n, m), v in entries.items():
        out[n, m] = scale * v
    return out


_OSC = {(2, 0): 0.5, (0, 2): 0.5}
_QUARTIC = {(4, 0): 0.25, (2, 2): 0.5, (0, 4): 0.25, (0, 0): 1.0}

PRESETS = {
    "free": Hamiltonian(
        "free", lambda t: _c({(0, 2): 0.5}), False, 0.0, "p^2/2",
        "Re(i f) = 0 (quasi-dissipative with delta = 0); not hypoelliptic (f vanishes on p = 0)",
    ),
    "oscillator": Hamiltonian(
        "oscillator", lambda t: _c(_OSC), False, 0.0, "(q^2 + p^2)/2",
        "Re(i f) = 0; hypoelliptic away from the origin only (f(0) = 0)",
    ),
    "quartic": Hamiltonian(
        "quartic", lambda t: _c(_QUARTIC), False, 0.0, "(q^2 + p^2)^2/4 + 1",
        "passes all three aptness checks (|f| >= 1, derivatives gain one power of |z|)",
    ),
    "shifted-dissipative": Hamiltonian(
        "shifted-dissipative", lambda t: _c({(0, 0): 1.0, **_OSC}, -1j), False, 1.0,
        "-i (1 + (q^2 + p^2)/2), so i f = 1 + (q^2 + p^2)/2",
        "Re(i f) >= 1: quasi-dissipative with delta = 1; norms decay",
    ),
    "time-ramp": Hamiltonian(
        "time-ramp", lambda t: _c(_OSC, 1.0 + t), True, 0.0, "(1 + t)(q^2 + p^2)/2",
        "Re(i f) = 0; continuous in t (modulus linear in the time step)",
    ),
}


def get_preset(name: str) -> Hamiltonian:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown hamiltonian preset {name!r}; choose from {', '.join(PRESETS)}") from None


# aptness diagnostics


@dataclass
class AptnessReport:
    min_re_if: float
    delta: float
    quasi_dissipative: bool
    hypoelliptic_ratio: float
    hypoelliptic: bool
    t_modulus: list
    t_continuous: bool
    m1: float
    m_positive: bool
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.quasi_dissipative and self.hypoelliptic and self.t_continuous and self.m_positive


def check_aptness(H: Hamiltonian, grid: PhaseGrid | None = None, hbars: Sequence[float] = (0.05, 0.1, 0.3, 1.0),
                  delta: float | None = None, times: Sequence[float] = (0.0, 0.5, 1.0), r: tuple = (1.0, 0.0),
                  ratio_bound: float = 100.0) -> AptnessReport:
    """Quasi-dissipativity, hypoellipticity and t-continuity of a polynomial hamiltonian.

    (a) ``min Re(i f) >= delta`` over the grid and the sampled times;
    (b) ``sup |d^a f| (1+|z|)^(r1|a|) hbar^(r2|a|) / |i f - delta|`` over ``|a| <= 2``
        stays below ``ratio_bound``;
    (c) the modulus ``max_t |f(t+tau) - f(t)| / max|f|`` shrinks with ``tau``.
    The growth order ``m1`` comes from :func:`estimate_order`; ``m1 > 0`` is required.
    """
    delta = H.delta if delta is None else delta
    grid = grid or PhaseGrid(128, 128, 8.0, 8.0, hbar=min(hbars))
    q, p = grid.mesh()
    rz = np.hypot(q, p)
    r1, r2 = r
    notes = []
    min_re, worst_ratio = np.inf, 0.0
    for t in times:
        poly = H.poly_at(t)
        f = poly(q, p)
        if_ = 1j * f
        min_re = min(min_re, float(np.real(if_).min()))
        denom = np.abs(if_ - delta)
        for hbar in hbars:
            ratio = np.zeros_like(rz)
            for k in range(3):
                for j in range(k + 1):
                    d = np.abs(poly.derivative(k - j, j)(q, p))
                    ratio = np.maximum(ratio, d * (1 + rz) ** (r1 * k) * hbar ** (r2 * k))
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(denom > 0, ratio / np.where(denom > 0, denom, 1.0), np.where(ratio > 0, np.inf, 0.0))
            worst_ratio = max(worst_ratio, float(np.max(val)))
    quasi = min_re >= delta - 1e-12
    hypo = worst_ratio < ratio_bound
    if not np.isfinite(worst_ratio):
        notes.append("i f - delta vanishes on the grid")
    taus = (0.1, 0.05, 0.025)
    modulus = []
    t0, t1 = min(times), max(times)
    ts = np.linspace(t0, t1, 5)
    for tau in taus:
        worst = 0.0
        for t in ts:
            a, b = H.poly_at(t)(q, p), H.poly_at(t + tau)(q, p)
            worst = max(worst, float(np.abs(b - a).max() / max(np.abs(a).max(), 1e-300)))
        modulus.append(worst)
    t_cont = modulus[-1] == 0.0 or modulus[-1] <= 0.6 * modulus[0]
    # growth order on an unscaled window, several hbar values
    family = []
    for hbar in np.geomspace(min(hbars), max(hbars), max(4, len(hbars))):
        g = PhaseGrid(256, 256, 32.0, 32.0, hbar=float(hbar))
        family.append(H.symbol_at(t0, g))
    diag = estimate_order(family)
    m_pos = diag.m1 > 0.5 and not diag.inconclusive
    if diag.inconclusive:
        notes.append("growth-order fit inconclusive")
    return AptnessReport(min_re, delta, quasi, worst_ratio, hypo, modulus, t_cont, diag.m1, m_pos, notes)


# single steps and product integrals


def _entries(A) -> np.ndarray:
    return A.entries if isinstance(A, OperatorMatrix) else np.asarray(A, dtype=complex)


def backward_euler_step(A, dt: float, psi: np.ndarray) -> np.ndarray:
    """Solve ``(1 + dt A) psi' = psi``; ``A`` is the generator ``(i/hbar) f^``."""
    if dt <= 0:
        raise ValueError("time step must be positive")
    M = np.eye(len(psi)) + dt * _entries(A)
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = scipy.linalg.solve(M, psi, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularResolvent(f"resolvent singular at dt={dt}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise SingularResolvent(f"resolvent produced non-finite values at dt={dt}")
    return out


SCHEMES = ("backward_operator", "backward_symbol", "forward_operator")


def _factor(H: Hamiltonian, t: float, dt: float, scheme: str, basis, hbar: float, rule: str, n_radial: int):
    N = basis.N
    if scheme == "backward_symbol":
        if rule not in ("weyl", "antinormal"):
            raise ValueError(
                f"the resolvent symbol has no {rule} quantization: it is not entire in (z+, z-); "
                "use weyl or antinormal slices"
            )
        res = lambda q, p: 1.0 / (1.0 + 1j * dt / hbar * H.func(q, p, t))  # noqa: E731
        return quantize_function(res, basis, hbar, rule=rule, n_radial=n_radial).entries
    gen = (1j * dt / hbar) * H.operator_at(t, basis, hbar).entries
    if scheme == "backward_operator":
        try:
            return scipy.linalg.solve(np.eye(N) + gen, np.eye(N))
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularResolvent(str(exc)) from exc
    if scheme == "forward_operator":
        return np.eye(N) - gen
    raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")


def product_integral(H: Hamiltonian, P: Partition, scheme: str = "backward_operator", basis=None,
                     hbar: float = 1.0, rule: str = "weyl", n_radial: int = 160) -> OperatorMatrix:
    """Ordered product of per-step factors, later times to the left.

    Backward schemes sample ``f`` at ``t_(j+1)``, the forward scheme at ``t_j``.
    ``scheme="backward_symbol"`` quantizes the resolvent symbol in ``rule``.
    """
    basis = basis or FockBasis(64)
    rule = as_rule(rule).name
    N = basis.N
    if not H.time_dependent and P.is_uniform:
        t = P.knots[1] if scheme != "forward_operator" else P.knots[0]
        F = _factor(H, t, P.dts[0], scheme, basis, hbar, rule, n_radial)
        return OperatorMatrix(basis, np.linalg.matrix_power(F, P.steps), hbar)
    U = np.eye(N, dtype=complex)
    cache = {}
    for j, dt in enumerate(P.dts):
        t = P.knots[j + 1] if scheme != "forward_operator" else P.knots[j]
        key = (t if H.time_dependent else None, dt)
        if key not in cache:
            cache[key] = _factor(H, t, dt, scheme, basis, hbar, rule, n_radial)
        U = cache[key] @ U
    return OperatorMatrix(basis, U, hbar)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def evolve_state(H: Hamiltonian, P: Partition, psi0: np.ndarray, scheme: str = "backward_operator", basis=None,
                 hbar: float = 1.0, rule: str = "weyl", n_radial: int = 160) -> Trajectory:
    """Apply the per-step factors to ``psi0``, recording every intermediate state."""
    basis = basis or FockBasis(len(psi0))
    rule = as_rule(rule).name
    states = [np.asarray(psi0, dtype=complex)]
    cache = {}
    for j, dt in enumerate(P.dts):
        t = P.knots[j + 1] if scheme != "forward_operator" else P.knots[j]
        psi = states[-1]
        if scheme == "backward_operator":
            key = (t if H.time_dependent else None, dt)
            if key not in cache:
                cache[key] = (1j / hbar) * H.operator_at(t, basis, hbar).entries
            states.append(backward_euler_step(cache[key], dt, psi))
        else:
            key = (t if H.time_dependent else None, dt)
            if key not in cache:
                cache[key] = _factor(H, t, dt, scheme, basis, hbar, rule, n_radial)
            states.append(cache[key] @ psi)
    return Trajectory(P.knots.copy(), np.array(states))


# reference propagators


def exact_propagator(H: Hamiltonian, t: float, basis=None, hbar: float = 1.0) -> OperatorMatrix:
    """``exp(-i t f^/hbar)`` for a time-independent hamiltonian (eigendecomposition)."""
    if H.time_dependent:
        raise ValueError("the eigendecomposition oracle needs a time-independent hamiltonian")
    basis = basis or FockBasis(64)
    F = H.operator_at(0.0, basis, hbar).entries
    if np.allclose(F, F.conj().T, atol=1e-12 * max(1.0, np.abs(F).max())):
        w, V = np.linalg.eigh(0.5 * (F + F.conj().T))
        U = (V * np.exp(-1j * t * w / hbar)) @ V.conj().T
    else:
        U = scipy.linalg.expm(-1j * t / hbar * F)
    return OperatorMatrix(basis, U, hbar)


def richardson_propagator(H: Hamiltonian, t_start: float, t_end: float, mesh: float, basis=None,
                          hbar: float = 1.0) -> OperatorMatrix:
    """``2 U(mesh/20) - U(mesh/10)`` from backward-operator products (first-order extrapolation)."""
    basis = basis or FockBasis(64)
    fine = product_integral(H, Partition.from_mesh(t_start, t_end, mesh / 20), "backward_operator", basis, hbar)
    coarse = product_integral(H, Partition.from_mesh(t_start, t_end, mesh / 10), "backward_operator", basis, hbar)
    return OperatorMatrix(basis, 2 * fine.entries - coarse.entries, hbar)


def block_error(A, B, block: int = DEFAULT_BLOCK) -> float:
    a, b = _entries(A), _entries(B)
    return float(np.linalg.norm(a[:block, :block] - b[:block, :block]))


# convergence reports


@dataclass
class ConvergenceReport:
    meshes: np.ndarray
    errors: np.ndarray
    norm_kind: str
    scheme: str = "backward_operator"
    rule: str = "weyl"
    hbar: float = 1.0
    fitted_order: float = float("nan")
    residual: float = float("nan")
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.meshes = np.asarray(self.meshes, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.norm_kind not in ("operator_frobenius", "symbol_weak", "state_l2"):
            raise ValueError(f"unknown norm kind {self.norm_kind!r}")
        if len(self.meshes) > 1 and not np.all(np.diff(self.meshes) < 0):
            raise ValueError("meshes must be strictly decreasing")
        self.fitted_order, self.residual = fit_order(self.meshes, self.errors)
        if len(self.meshes) < 2:
            self.flags.append("fitted order undefined: fewer than two meshes")

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    def rows(self) -> list:
        return [
            {"mesh": m, "error": e, "scheme": self.scheme, "rule": self.rule, "hbar": self.hbar}
            for m, e in zip(self.meshes, self.errors)
        ]


def fit_order(meshes, errors) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(mesh), with RMS residual."""
    m, e = np.asarray(meshes, float), np.asarray(errors, float)
    ok = (m > 0) & (e > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    x, y = np.log(m[ok]), np.log(e[ok])
    A = np.vstack([x, np.ones_like(x)]).T
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(sol[0]), float(np.sqrt(np.mean((A @ sol - y) ** 2)))


def write_reports_csv(reports: Sequence[ConvergenceReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mesh", "error", "scheme", "rule", "hbar"])
        for rep in reports:
            for row in rep.rows():
                w.writerow([_g(row["mesh"]), _g(row["error"]), row["scheme"], row["rule"], _g(row["hbar"])])


def _g(x: float) -> str:
    return "%.17g" % x


def convergence_study(H: Hamiltonian, meshes: Sequence[float], scheme: str = "backward_operator",
                      hbar: float = 1.0, basis=None, reference: str = "auto", t_start: float = 0.0,
                      t_end: float = 1.0, block: int = DEFAULT_BLOCK, rule: str = "weyl",
                      n_radial: int = 160) -> ConvergenceReport:
    """Operator error of the product integral on the leading ``block`` levels, per mesh."""
    basis = basis or FockBasis(64)
    meshes = np.asarray(meshes, dtype=float)
    if reference == "auto":
        reference = "richardson" if H.time_dependent else "eigen"
    if reference == "eigen":
        ref = exact_propagator(H, t_end - t_start, basis, hbar)
    elif reference == "richardson":
        ref = richardson_propagator(H, t_start, t_end, meshes.min(), basis, hbar)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    errors = []
    for h in meshes:
        U = product_integral(H, Partition.from_mesh(t_start, t_end, h), scheme, basis, hbar, rule, n_radial)
        errors.append(block_error(U, ref, block))
    rep = ConvergenceReport(meshes, errors, "operator_frobenius", scheme, rule, hbar)
    rep.meta.update({"reference": reference, "block": block, "hamiltonian": H.name, "N": basis.N})
    return rep


# weak symbol convergence


@dataclass(frozen=True)
class WeakBattery:
    """Gaussian-times-polynomial test functions in units of sqrt(hbar)."""

    seed: int = 20240917
    count: int = 20

    def functions(self, hbar: float) -> list:
        rng = np.random.default_rng(self.seed)
        s = np.sqrt(hbar)
        out = []
        for _ in range(self.count):
            rad, ang = 1.5 * np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
            q0, p0 = rad * np.cos(ang), rad * np.sin(ang)
            width = rng.uniform(0.6, 1.2)
            c = rng.normal(size=6)

            def phi(q, p, q0=q0, p0=p0, width=width, c=c):
                x, y = q / s - q0, p / s - p0
                poly = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
                return poly * np.exp(-(x * x + y * y) / (2 * width**2))

            out.append(phi)
        return out


_PAIRING_RULE = {"weyl": "weyl", "normal": "antinormal"}


def battery_operators(battery: WeakBattery, rule: str, basis, hbar: float, n_radial: int = 160) -> list:
    """Operators whose trace against U equals the pairing of U's ``rule``-symbol with each test function."""
    rule = as_rule(rule).name
    if rule not in _PAIRING_RULE:
        raise ValueError(f"weak symbol studies support the weyl and normal rules, not {rule!r}")
    dual = _PAIRING_RULE[rule]
    return [quantize_function(phi, basis, hbar, rule=dual, n_radial=n_radial).entries for phi in battery.functions(hbar)]


def weak_distance(U, V, tests: list) -> float:
    """``max_k |<u - v, phi_k>|`` through ``Tr((U - V) psi_k)``."""
    D = _entries(U) - _entries(V)
    return float(max(abs(np.sum(D * T.T)) for T in tests))


def symbol_convergence_study(H: Hamiltonian, rule: str, meshes: Sequence[float], hbar: float = 1.0, basis=None,
                             battery: WeakBattery | None = None, t_start: float = 0.0, t_end: float = 1.0,
                             slices: str = "weyl", n_radial: int = 160) -> ConvergenceReport:
    """Weak distance between the ``rule``-symbols of the time-sliced product and of the reference.

    Slices are resolvent symbols quantized in ordering ``slices`` (Weyl by
    default).  The pairing ``<u^rule, phi>`` equals ``Tr(U psi)`` with ``psi``
    the quantization of ``phi`` in the dual rule, so no grid symbol of ``U``
    is formed.
    """
    basis = basis or FockBasis(64)
    battery = battery or WeakBattery()
    rule = as_rule(rule).name
    meshes = np.asarray(meshes, dtype=float)
    tests = battery_operators(battery, rule, basis, hbar, n_radial)
    if H.time_dependent:
        ref = richardson_propagator(H, t_start, t_end, meshes.min(), basis, hbar)
    else:
        ref = exact_propagator(H, t_end - t_start, basis, hbar)
    errors = []
    for h in meshes:
        U = product_integral(H, Partition.from_mesh(t_start, t_end, h), "backward_symbol", basis, hbar, slices, n_radial)
        errors.append(weak_distance(U, ref, tests))
    rep = ConvergenceReport(meshes, errors, "symbol_weak", f"backward_symbol({slices})", rule, hbar)
    rep.meta.update({"seed": battery.seed, "count": battery.count, "hamiltonian": H.name})
    return rep


# short-time ansatz comparison


@dataclass
class AnsatzComparison:
    dt: float
    rule: str
    resolvent_error: float | None
    exponential_error: float | None
    resolvent_coefficient: float | None
    exponential_coefficient: float | None
    resolvent_sup: float
    exponential_sup: float
    notes: list = field(default_factory=list)


def dft_ansatz_compare(H: Hamiltonian, dt: float, rule: str = "weyl", basis=None, hbar: float = 1.0, t: float = 0.0,
                       block: int = DEFAULT_BLOCK, grid: PhaseGrid | None = None, n_radial: int = 160) -> AnsatzComparison:
    """Distance of the resolvent and exponential short-time symbols from the exact step."""
    basis = basis or FockBasis(64)
    rule = as_rule(rule).name
    grid = grid or PhaseGrid.default(hbar)
    q, p = grid.mesh()
    f = H.func(q, p, t)
    res_sup = float(np.abs(1.0 / (1.0 + 1j * dt / hbar * f)).max())
    exp_sup = float(np.abs(np.exp(-1j * dt / hbar * f)).max())
    notes = []
    if rule not in ("weyl", "antinormal"):
        notes.append(f"no {rule} quantization of non-entire symbols; only symbol bounds recorded")
        return AnsatzComparison(dt, rule, None, None, None, None, res_sup, exp_sup, notes)
    F = H.operator_at(t, basis, hbar).entries
    exact = scipy.linalg.expm(-1j * dt / hbar * F)
    res = quantize_function(lambda a, b: 1.0 / (1.0 + 1j * dt / hbar * H.func(a, b, t)), basis, hbar, rule, n_radial)
    ex = quantize_function(lambda a, b: np.exp(-1j * dt / hbar * H.func(a, b, t)), basis, hbar, rule, n_radial)
    e1, e2 = block_error(res, exact, block), block_error(ex, exact, block)
    return AnsatzComparison(dt, rule, e1, e2, e1 / dt**2, e2 / dt**2, res_sup, exp_sup, notes)
