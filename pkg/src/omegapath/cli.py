"""Command line: ``run <config>``, ``list-presets``, ``dump <file>``.

Configs are INI files.  Exit codes: 0 success, 2 invalid config, 3 a numerical
guard failed, 4 input/output failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .coherent import MonteCarloError, QuadratureError, _powers, coherent_path_integral, write_path_csv
from .container import checksum, describe, load, save, write_symbol_csv
from .evolution import (PRESETS, Hamiltonian, Partition, SingularResolvent, WeakBattery, check_aptness,
                        convergence_study, dft_ansatz_compare, evolve_state, get_preset,
                        symbol_convergence_study, write_reports_csv)
from .omega import RULE_NAMES, ZeroSetViolation
from .phase_grid import AliasingError, PhaseGrid
from .quantizer import FockBasis, TruncationError, dequantize, quantize_symbol
from .studies import commutator_check, ordering_check, star_product_check, trace_check

EXPERIMENTS = ("ordering-check", "star-product", "quantize", "evolve", "converge", "dft-compare",
               "coherent-path", "trace-check")
OUTPUT_ENV = "OMEGAPATH_OUTPUT_ROOT"
DEGREE_CAP = 8

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class GuardFailure(ArithmeticError):
    def __init__(self, invariant: str, detail: str):
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant


GUARDS = (GuardFailure, AliasingError, TruncationError, ZeroSetViolation, SingularResolvent, QuadratureError,
          MonteCarloError, FloatingPointError)


@dataclass
class RunConfig:
    experiment: str
    hamiltonian: Hamiltonian
    hbars: list
    meshes: list
    rule: str = "weyl"
    seed: int = 20240917
    output: Path = Path("omegapath-runs")
    n: int = 128
    width: float = 8.0
    levels: int = 64
    t_end: float = 1.0
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


# parsing


def _number(text: str, name: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(name, f"not a number: {text!r}") from None


def _list(text: str, name: str) -> list:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ConfigError(name, "empty list")
    return [_number(t, name) for t in items]


def _coefficients(text: str) -> np.ndarray:
    """``n m value`` triples separated by ``;`` for ``value q^n p^m``."""
    terms = {}
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ConfigError("hamiltonian.coefficients", f"expected 'n m value', got {chunk.strip()!r}")
        try:
            n, m, v = int(parts[0]), int(parts[1]), complex(parts[2])
        except ValueError:
            raise ConfigError("hamiltonian.coefficients", f"cannot parse {chunk.strip()!r}") from None
        if n < 0 or m < 0:
            raise ConfigError("hamiltonian.coefficients", "exponents must be non-negative")
        if not np.isfinite(v):
            raise ConfigError("hamiltonian.coefficients", "coefficients must be finite")
        terms[(n, m)] = terms.get((n, m), 0) + v
    if not terms:
        raise ConfigError("hamiltonian.coefficients", "no terms given")
    deg = max(n + m for n, m in terms)
    if deg > DEGREE_CAP:
        raise ConfigError("hamiltonian.coefficients", f"degree {deg} exceeds the cap {DEGREE_CAP}")
    c = np.zeros((deg + 1, deg + 1), dtype=complex)
    for (n, m), v in terms.items():
        c[n, m] = v
    return c


def _int(sec, key: str, default: int, name: str, low: int = 1) -> int:
    try:
        v = sec.getint(key, fallback=default)
    except ValueError:
        raise ConfigError(name, f"not an integer: {sec.get(key)!r}") from None
    if v < low:
        raise ConfigError(name, f"must be >= {low}, got {v}")
    return v


def parse_config(text: str, output_root: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    if not cp.has_section("run"):
        raise ConfigError("run", "missing [run] section")
    run = cp["run"]
    exp = run.get("experiment", "").strip()
    if exp not in EXPERIMENTS:
        raise ConfigError("run.experiment", f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    try:
        seed = int(run.get("seed", "20240917"))
    except ValueError:
        raise ConfigError("run.seed", f"not an integer: {run.get('seed')!r}") from None
    root = output_root or os.environ.get(OUTPUT_ENV) or "omegapath-runs"
    output = Path(run.get("output", str(Path(root) / exp)))

    ham = cp["hamiltonian"] if cp.has_section("hamiltonian") else {}
    if "coefficients" in ham:
        H = Hamiltonian.from_coefficients(ham.get("name", "custom"), _coefficients(ham["coefficients"]),
                                          _number(ham.get("delta", "0"), "hamiltonian.delta"))
    else:
        name = ham.get("preset", "oscillator").strip()
        if name not in PRESETS:
            raise ConfigError("hamiltonian.preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        H = get_preset(name)

    study = cp["study"] if cp.has_section("study") else cp["DEFAULT"]
    hbars = _list(study.get("hbar", "1.0"), "study.hbar")
    for h in hbars:
        if not h > 0:
            raise ConfigError("study.hbar", f"hbar must be positive, got {h:g}")
    meshes = _list(study.get("meshes", "1/8, 1/16, 1/32, 1/64, 1/128"), "study.meshes")
    for h in meshes:
        if not 0 < h <= 1:
            raise ConfigError("study.meshes", f"mesh sizes must lie in (0, 1], got {h:g}")
    rule = study.get("rule", "weyl").strip().lower()
    if rule not in RULE_NAMES:
        raise ConfigError("study.rule", f"unknown ordering {rule!r}; choose from {'|'.join(RULE_NAMES)}")
    t_end = _number(study.get("t_end", "1"), "study.t_end")
    if not t_end > 0:
        raise ConfigError("study.t_end", "must be positive")

    grid = cp["grid"] if cp.has_section("grid") else cp["DEFAULT"]
    n = _int(grid, "n", 128, "grid.n", 8)
    if n % 2:
        raise ConfigError("grid.n", "must be even")
    width = _number(grid.get("width", "8"), "grid.width")
    if not width > 0:
        raise ConfigError("grid.width", "must be positive")
    levels = _int(grid, "levels", 64, "grid.levels", 8)

    params = {k: v for k, v in study.items() if k not in ("hbar", "meshes", "rule", "t_end")}
    raw = {s: dict(cp[s]) for s in cp.sections()}
    return RunConfig(exp, H, hbars, meshes, rule, seed, output, n, width, levels, t_end, params, raw)


# experiments


def _g(x) -> str:
    return "%.17g" % x


def _write_rows(path: Path, header: list, rows: list) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _param(cfg: RunConfig, key: str, default, cast=float):
    if key not in cfg.params:
        return default
    try:
        return cast(Fraction(cfg.params[key]) if cast is float else cfg.params[key])
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"study.{key}", f"cannot parse {cfg.params[key]!r}") from None


def _ordering_check(cfg: RunConfig) -> list[Path]:
    tol = _param(cfg, "tolerance", 1e-10)
    rows = []
    for h in cfg.hbars:
        rows += ordering_check(int(_param(cfg, "max_degree", 4)), cfg.levels, h)
    out = _write_rows(cfg.output / "ordering_check.csv", ["hbar", "rule", "n", "m", "abs_error", "rel_error"],
                      [[r["hbar"], r["rule"], r["n"], r["m"], r["abs_error"], r["rel_error"]] for r in rows])
    worst = max(r["abs_error"] for r in rows)
    if worst >= tol:
        raise GuardFailure("ordering-table oracle", f"interior error {worst:.3e} >= {tol:g}")
    return [out]


def _star_product(cfg: RunConfig) -> list[Path]:
    tol = _param(cfg, "tolerance", 1e-6)
    rows, comm = [], []
    for h in cfg.hbars:
        rows += star_product_check(h, cfg.n, cfg.width, cfg.levels)
        comm.append(commutator_check(h))
    a = _write_rows(cfg.output / "star_product.csv", ["hbar", "n1", "m1", "n2", "m2", "rel_error"],
                    [[r["hbar"], r["n1"], r["m1"], r["n2"], r["m2"], r["rel_error"]] for r in rows])
    b = _write_rows(cfg.output / "commutator.csv", ["hbar", "kernel_error", "asymptotic_error"],
                    [[c["hbar"], c["kernel"], c["asymptotic"]] for c in comm])
    worst = max(r["rel_error"] for r in rows)
    if worst >= tol:
        raise GuardFailure("star-product oracle", f"relative error {worst:.3e} >= {tol:g}")
    if max(max(c["kernel"], c["asymptotic"]) for c in comm) > 1e-8:
        raise GuardFailure("canonical commutator", "q*p - p*q differs from i hbar")
    return [a, b]


def _quantize(cfg: RunConfig) -> list[Path]:
    out = []
    for h in cfg.hbars:
        grid = PhaseGrid.default(h, n=cfg.n, width=cfg.width)
        f = cfg.hamiltonian.symbol_at(0.0, grid)
        A = cfg.hamiltonian.operator_at(0.0, FockBasis(cfg.levels), h)
        tag = f"hbar{_g(h)}"
        out.append(save(f, cfg.output / f"symbol_{tag}.bin"))
        out.append(save(A, cfg.output / f"operator_{tag}.bin"))
        write_symbol_csv(f, cfg.output / f"symbol_{tag}.csv")
        out.append(cfg.output / f"symbol_{tag}.csv")
        # windowed round trip: Gaussian-damped symbol through the grid quantizer and back
        win = grid.sample(lambda q, p: cfg.hamiltonian.func(q, p) * np.exp(-(q * q + p * p) / (4 * h)))
        back = dequantize(quantize_symbol(win, FockBasis(cfg.levels)), "weyl", grid)
        m = grid.interior_mask()
        err = float(np.abs(back.values - win.values)[m].max() / max(np.abs(win.values).max(), 1e-300))
        p = _write_rows(cfg.output / f"roundtrip_{tag}.csv", ["hbar", "rel_error"], [[h, err]])
        out.append(p)
    return out


def _evolve(cfg: RunConfig) -> list[Path]:
    scheme = cfg.params.get("scheme", "backward_operator")
    mesh = min(cfg.meshes)
    rows = []
    for h in cfg.hbars:
        basis = FockBasis(cfg.levels)
        amp = _param(cfg, "amplitude", 1.0)
        psi0 = _powers(amp, cfg.levels, 1.0)
        psi0 = psi0 / np.linalg.norm(psi0)
        tr = evolve_state(cfg.hamiltonian, Partition.from_mesh(0.0, cfg.t_end, mesh), psi0, scheme, basis, h,
                          cfg.rule)
        E = cfg.hamiltonian.operator_at(0.0, basis, h).entries
        for t, s in zip(tr.times, tr.states):
            rows.append([h, float(t), float(np.linalg.norm(s)), float(np.real(np.vdot(s, E @ s)))])
        if scheme.startswith("backward") and cfg.hamiltonian.delta >= 0 and np.any(np.diff(tr.norms) > 1e-12):
            raise GuardFailure("resolvent contraction", "state norm increased across a backward step")
    return [_write_rows(cfg.output / "trajectory.csv", ["hbar", "t", "norm", "energy"], rows)]


def _converge(cfg: RunConfig) -> list[Path]:
    scheme = cfg.params.get("scheme", "backward_operator")
    reference = cfg.params.get("reference", "auto")
    weak = cfg.params.get("weak", "false").lower() in ("1", "true", "yes")
    reps, summary = [], []
    for h in cfg.hbars:
        rep = convergence_study(cfg.hamiltonian, cfg.meshes, scheme, h, FockBasis(cfg.levels), reference,
                                t_end=cfg.t_end, rule=cfg.rule)
        reps.append(rep)
        summary.append([h, rep.norm_kind, rep.scheme, rep.rule, rep.fitted_order, rep.residual, int(rep.monotone)])
        if weak:
            for rule in ("weyl", "normal"):
                srep = symbol_convergence_study(cfg.hamiltonian, rule, cfg.meshes, h, FockBasis(cfg.levels),
                                                WeakBattery(seed=cfg.seed), t_end=cfg.t_end)
                reps.append(srep)
                summary.append([h, srep.norm_kind, srep.scheme, srep.rule, srep.fitted_order, srep.residual,
                                int(srep.monotone)])
    a = cfg.output / "convergence.csv"
    write_reports_csv(reps, a)
    b = _write_rows(cfg.output / "convergence_summary.csv",
                    ["hbar", "norm", "scheme", "rule", "fitted_order", "residual", "monotone"], summary)
    apt = []
    for h in cfg.hbars:
        r = check_aptness(cfg.hamiltonian, hbars=(h,))
        apt.append([h, r.min_re_if, int(r.quasi_dissipative), r.hypoelliptic_ratio, int(r.hypoelliptic),
                    int(r.t_continuous), r.m1])
    c = _write_rows(cfg.output / "aptness.csv", ["hbar", "min_re_if", "quasi_dissipative", "hypoelliptic_ratio",
                                                 "hypoelliptic", "t_continuous", "m1"], apt)
    return [a, b, c]


def _dft_compare(cfg: RunConfig) -> list[Path]:
    rows = []
    for h in cfg.hbars:
        for dt in cfg.meshes:
            r = dft_ansatz_compare(cfg.hamiltonian, dt, cfg.rule, FockBasis(cfg.levels), h)
            rows.append([h, dt, r.rule, _opt(r.resolvent_error), _opt(r.exponential_error),
                         _opt(r.resolvent_coefficient), _opt(r.exponential_coefficient), r.resolvent_sup,
                         r.exponential_sup])
    return [_write_rows(cfg.output / "dft_compare.csv",
                        ["hbar", "dt", "rule", "resolvent_error", "exponential_error", "resolvent_coefficient",
                         "exponential_coefficient", "resolvent_sup", "exponential_sup"], rows)]


def _opt(x):
    return "" if x is None else float(x)


def _coherent_path(cfg: RunConfig) -> list[Path]:
    method = cfg.params.get("method", "gauss_hermite")
    radius = _param(cfg, "probe_radius", 0.5)
    g = np.array([-radius, 0.0, radius])
    zp = (g[:, None] + 1j * g[None, :]).ravel()
    zm = np.conj(zp)
    kw = {"points": int(_param(cfg, "points", 24))} if method == "gauss_hermite" else {
        "samples": int(_param(cfg, "samples", 50000)), "seed": cfg.seed}
    results = []
    for h in cfg.hbars:
        for mesh in cfg.meshes:
            P = Partition.from_mesh(0.0, cfg.t_end, mesh)
            results.append(coherent_path_integral(cfg.hamiltonian, P, np.sqrt(h) * zp, np.sqrt(h) * zm, method, h,
                                                  int(_param(cfg, "path_levels", 160)), **kw))
    out = cfg.output / "coherent_path.csv"
    write_path_csv(results, out)
    return [out]


def _trace_check(cfg: RunConfig) -> list[Path]:
    tol = _param(cfg, "tolerance", 1e-6)
    count = int(_param(cfg, "count", 100))
    rows = []
    for h in cfg.hbars:
        rows += trace_check(count, h, cfg.seed, N=cfg.levels)
    out = _write_rows(cfg.output / "trace_check.csv",
                      ["index", "hbar", "pairing_re", "pairing_im", "oracle_re", "oracle_im", "rel_error"],
                      [[r["index"], r["hbar"], r["pairing"].real, r["pairing"].imag, r["oracle"].real,
                        r["oracle"].imag, r["rel_error"]] for r in rows])
    worst = max(r["rel_error"] for r in rows)
    if worst >= tol:
        raise GuardFailure("trace formula", f"relative error {worst:.3e} >= {tol:g}")
    return [out]


RUNNERS = {
    "ordering-check": _ordering_check,
    "star-product": _star_product,
    "quantize": _quantize,
    "evolve": _evolve,
    "converge": _converge,
    "dft-compare": _dft_compare,
    "coherent-path": _coherent_path,
    "trace-check": _trace_check,
}


def write_manifest(cfg: RunConfig, files: list[Path]) -> Path:
    entries = [{"file": p.name, "sha256": checksum(p), "bytes": p.stat().st_size} for p in sorted(files)]
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.raw,
        "seed": cfg.seed,
        "coherent_state_convention": "bargmann",
        "versions": {"omegapath": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "files": entries,
    }
    path = cfg.output / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run(cfg: RunConfig) -> list[Path]:
    cfg.output.mkdir(parents=True, exist_ok=True)
    with np.errstate(over="raise", invalid="ignore", divide="ignore", under="ignore"):
        files = RUNNERS[cfg.experiment](cfg)
    # every file the experiment produced, including plot dumps not returned explicitly
    produced = sorted(p for p in cfg.output.iterdir() if p.is_file() and p.name != "manifest.json")
    write_manifest(cfg, produced)
    return files


def list_presets() -> str:
    lines = []
    for name, H in PRESETS.items():
        lines.append(f"{name:20s} f = {H.description}")
        lines.append(f"{'':20s} {H.expectation}")
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="omegapath", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from an INI config")
    r.add_argument("config")
    r.add_argument("--output-root", default=None, help=f"default output root (else ${OUTPUT_ENV})")
    sub.add_parser("list-presets", help="list built-in hamiltonians")
    d = sub.add_parser("dump", help="pretty-print a binary symbol or operator file")
    d.add_argument("file")
    d.add_argument("--entries", type=int, default=6)
    args = ap.parse_args(argv)

    if args.command == "list-presets":
        print(list_presets())
        return EXIT_OK
    if args.command == "dump":
        try:
            print(describe(load(args.file), args.entries))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text, args.output_root)
        files = run(cfg)
    except ConfigError as exc:
        print(f"config error in {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GUARDS as exc:
        name = getattr(exc, "invariant", type(exc).__name__)
        print(f"numerical guard failed [{name}]: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in files:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
