import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omegapath.evolution import (
    PRESETS,
    ConvergenceReport,
    Hamiltonian,
    Partition,
    SingularResolvent,
    WeakBattery,
    backward_euler_step,
    block_error,
    check_aptness,
    convergence_study,
    dft_ansatz_compare,
    evolve_state,
    exact_propagator,
    fit_order,
    get_preset,
    product_integral,
    richardson_propagator,
    symbol_convergence_study,
    write_reports_csv,
)
from omegapath.quantizer import FockBasis, zminus_op

OSC = PRESETS["oscillator"]
ZERO = Hamiltonian.from_coefficients("zero", [[0.0]])


def coherent(N, alpha):
    k = np.arange(N)
    logf = np.cumsum(np.log(np.maximum(k, 1)))
    v = np.exp(-abs(alpha) ** 2 / 2 + k * np.log(abs(alpha) + 1e-300) - logf / 2) * np.exp(1j * k * np.angle(alpha))
    return v.astype(complex)


# partitions


def test_partition_basics():
    P = Partition.uniform(0.0, 1.0, 8)
    assert P.steps == 8 and P.mesh == pytest.approx(0.125) and P.is_uniform
    Q = Partition(np.array([0.0, 0.1, 0.5, 0.6]))
    assert Q.mesh == pytest.approx(0.4) and not Q.is_uniform
    assert Partition.from_mesh(0.0, 1.0, 2.0**-5).steps == 32
    assert Partition.from_mesh(0.0, 1.0, 0.3).mesh <= 0.3


@pytest.mark.parametrize("knots", [[0.0], [0.0, 0.0, 1.0], [1.0, 0.5], [0.0, np.nan]])
def test_partition_rejects_bad_knots(knots):
    with pytest.raises(ValueError):
        Partition(np.array(knots))


# hamiltonians and aptness


def test_presets_are_listed():
    assert set(PRESETS) == {"free", "oscillator", "quartic", "shifted-dissipative", "time-ramp"}
    with pytest.raises(KeyError):
        get_preset("anharmonic")
    with pytest.raises(ValueError):
        Hamiltonian.from_coefficients("bad", [[np.inf]])
    assert PRESETS["time-ramp"].func(1.0, 0.0, t=1.0) == pytest.approx(1.0)


def test_aptness_shifted_dissipative():
    rep = check_aptness(PRESETS["shifted-dissipative"])
    assert rep.min_re_if == pytest.approx(1.0) and rep.quasi_dissipative
    assert rep.delta == 1.0


def test_aptness_oscillator_is_quasi_dissipative_with_zero_delta():
    rep = check_aptness(OSC)
    assert rep.min_re_if == pytest.approx(0.0, abs=1e-12) and rep.quasi_dissipative
    # i f - delta vanishes at the origin
    assert not rep.hypoelliptic


def test_aptness_zero_symbol_fails_growth():
    rep = check_aptness(ZERO)
    assert not rep.m_positive and not rep.passed


def test_aptness_quartic_passes():
    # i f = q^4 + p^4 + 1
    c = np.zeros((5, 5), dtype=complex)
    c[4, 0] = c[0, 4] = c[0, 0] = 1.0
    H = Hamiltonian("q4p4", lambda t: -1j * c)
    rep = check_aptness(H)
    assert rep.quasi_dissipative and rep.hypoelliptic and rep.t_continuous and rep.m_positive
    assert rep.m1 == pytest.approx(4, abs=0.3)


# single steps


def test_step_with_zero_generator_is_identity():
    psi = coherent(16, 0.5 + 0.2j)
    assert np.array_equal(backward_euler_step(np.zeros((16, 16)), 0.1, psi), psi)


def test_step_guards():
    with pytest.raises(ValueError):
        backward_euler_step(np.eye(4), 0.0, np.ones(4))
    with pytest.raises(SingularResolvent):
        backward_euler_step(-10.0 * np.eye(4), 0.1, np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 10.0))
def test_self_adjoint_step_contracts(seed, dt):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    F = X + X.conj().T
    psi = rng.normal(size=12) + 1j * rng.normal(size=12)
    out = backward_euler_step(1j * F, dt, psi)
    assert np.linalg.norm(out) <= np.linalg.norm(psi) * (1 + 1e-12)


def test_oscillator_step_is_second_order_locally():
    hbar, N = 1.0, 48
    basis = FockBasis(N)
    A = (1j / hbar) * OSC.operator_at(0.0, basis, hbar).entries
    psi = coherent(N, 1.0 + 0.5j)
    errs = []
    for dt in (0.01, 0.005):
        exact = exact_propagator(OSC, dt, basis, hbar).entries @ psi
        errs.append(np.linalg.norm(backward_euler_step(A, dt, psi) - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


# product integrals


@pytest.mark.parametrize("scheme,rule", [("backward_operator", "weyl"), ("forward_operator", "weyl"),
                                         ("backward_symbol", "weyl"), ("backward_symbol", "antinormal")])
def test_zero_hamiltonian_gives_identity(scheme, rule):
    U = product_integral(ZERO, Partition.uniform(0, 1, 4), scheme, FockBasis(12), 1.0, rule, n_radial=60)
    assert np.allclose(U.entries, np.eye(12), atol=1e-12)


def test_symbol_scheme_rejects_non_entire_rules():
    with pytest.raises(ValueError):
        product_integral(OSC, Partition.uniform(0, 1, 2), "backward_symbol", FockBasis(12), rule="standard")
    with pytest.raises(ValueError):
        product_integral(OSC, Partition.uniform(0, 1, 2), "leapfrog", FockBasis(12))


@pytest.mark.parametrize("hbar", [1.0, 0.1])
def test_oscillator_backward_operator_first_order(hbar):
    rep = convergence_study(OSC, [2.0**-k for k in range(3, 8)], "backward_operator", hbar, FockBasis(48))
    assert 0.8 <= rep.fitted_order <= 1.2 and rep.monotone
    assert rep.meta["reference"] == "eigen"


def test_oscillator_backward_symbol_first_order():
    rep = convergence_study(OSC, [2.0**-k for k in range(3, 7)], "backward_symbol", 1.0, FockBasis(32), n_radial=120)
    assert 0.8 <= rep.fitted_order <= 1.2 and rep.monotone


def test_time_dependent_against_richardson():
    H = PRESETS["time-ramp"]
    # the energies double over [0, 1]; 2^-3 is still pre-asymptotic (order 0.73 from there)
    rep = convergence_study(H, [2.0**-k for k in range(5, 10)], hbar=1.0, basis=FockBasis(32))
    assert rep.meta["reference"] == "richardson"
    assert 0.8 <= rep.fitted_order <= 1.2 and rep.monotone
    # the richardson reference is itself converged well beyond the finest product
    r1 = richardson_propagator(H, 0, 1, 2.0**-9, FockBasis(32))
    r2 = richardson_propagator(H, 0, 1, 2.0**-10, FockBasis(32))
    assert block_error(r1, r2) < 0.05 * rep.errors[-1]


def test_semigroup_consistency():
    basis, h = FockBasis(24), 0.05
    one = product_integral(PRESETS["quartic"], Partition.from_mesh(0, 1, h), basis=basis, hbar=0.3).entries
    two = product_integral(PRESETS["quartic"], Partition.from_mesh(0, 2, h), basis=basis, hbar=0.3).entries
    assert np.allclose(two, one @ one, atol=1e-12)


def test_non_uniform_partition_runs_stepwise():
    basis = FockBasis(16)
    P = Partition(np.array([0.0, 0.1, 0.3, 0.35, 1.0]))
    U = product_integral(OSC, P, basis=basis).entries
    F = OSC.operator_at(0, basis, 1.0).entries
    expect = np.eye(16)
    for dt in P.dts:
        expect = np.linalg.solve(np.eye(16) + 1j * dt * F, expect)
    assert np.allclose(U, expect, atol=1e-13)


def test_scheme_agreement_is_first_order():
    basis = FockBasis(32)
    dists = []
    meshes = [2.0**-k for k in range(3, 7)]
    for h in meshes:
        P = Partition.from_mesh(0, 1, h)
        a = product_integral(OSC, P, "backward_operator", basis)
        b = product_integral(OSC, P, "backward_symbol", basis, n_radial=120)
        dists.append(block_error(a, b))
    C = max(d / h for d, h in zip(dists, meshes))
    assert np.isfinite(C) and C < 10
    assert fit_order(meshes, dists)[0] > 0.8


def test_unitarity_restoration():
    basis = FockBasis(32)
    devs, meshes = [], [2.0**-k for k in range(4, 9)]
    for h in meshes:
        U = product_integral(OSC, Partition.from_mesh(0, 1, h), basis=basis).entries
        devs.append(block_error(U.conj().T @ U, np.eye(32)))
    assert np.all(np.diff(devs) < 0)
    assert fit_order(meshes, devs)[0] == pytest.approx(1.0, abs=0.2)


# state evolution


def test_evolve_state_matches_product():
    basis = FockBasis(24)
    psi0 = coherent(24, 0.8)
    P = Partition.uniform(0, 1, 16)
    for scheme in ("backward_operator", "forward_operator"):
        tr = evolve_state(OSC, P, psi0, scheme, basis)
        U = product_integral(OSC, P, scheme, basis).entries
        assert np.allclose(tr.final, U @ psi0, atol=1e-13)
        assert tr.states.shape == (17, 24)


def test_ground_state_is_stationary_up_to_order_dt():
    basis = FockBasis(16)
    psi0 = np.eye(16)[0].astype(complex)
    for steps in (16, 64):
        tr = evolve_state(OSC, Partition.uniform(0, 1, steps), psi0, basis=basis)
        overlap = abs(np.vdot(tr.final / np.linalg.norm(tr.final), psi0))
        assert overlap == pytest.approx(1.0, abs=1e-12)
        assert 1 - np.linalg.norm(tr.final) < 1.0 / steps


def test_self_adjoint_norms_decrease_then_recover_with_mesh():
    basis = FockBasis(32)
    psi0 = coherent(32, 1.2)
    losses = []
    for steps in (8, 32, 128):
        tr = evolve_state(OSC, Partition.uniform(0, 1, steps), psi0, basis=basis)
        assert np.all(np.diff(tr.norms) <= 1e-12)
        losses.append(1 - tr.norms[-1])
    assert losses[0] > losses[1] > losses[2] > 0


def test_dissipative_decay_bound():
    hbar = 1.0
    H = PRESETS["shifted-dissipative"]
    basis = FockBasis(24)
    psi0 = coherent(24, 0.7)
    h = 2.0**-7
    tr = evolve_state(H, Partition.from_mesh(0, 1, h), psi0, basis=basis, hbar=hbar)
    bound = np.exp(-H.delta * tr.times / hbar)
    assert np.all(tr.norms <= bound + 5 * h)


# symbol convergence and the ansatz comparison


def test_single_mesh_report_is_flagged():
    rep = ConvergenceReport([0.1], [0.01], "operator_frobenius")
    assert np.isnan(rep.fitted_order) and rep.flags
    with pytest.raises(ValueError):
        ConvergenceReport([0.1, 0.2], [1, 1], "operator_frobenius")
    with pytest.raises(ValueError):
        ConvergenceReport([0.1], [1], "sup_norm")


def test_fit_order_recovers_slope():
    m = np.array([0.1, 0.05, 0.025])
    slope, res = fit_order(m, 3 * m**2)
    assert slope == pytest.approx(2.0) and res < 1e-12


def test_weak_symbol_convergence_oscillator_weyl():
    rep = symbol_convergence_study(OSC, "weyl", [2.0**-k for k in range(3, 8)], basis=FockBasis(32), n_radial=120)
    assert rep.norm_kind == "symbol_weak" and rep.monotone
    assert 0.8 <= rep.fitted_order <= 1.2


def test_weak_symbol_rule_restrictions():
    with pytest.raises(ValueError):
        symbol_convergence_study(OSC, "born-jordan", [0.1, 0.05], basis=FockBasis(12))


def test_battery_is_seeded():
    a, b = WeakBattery(seed=5).functions(1.0), WeakBattery(seed=5).functions(1.0)
    assert len(a) == 20
    assert all(fa(0.3, -0.2) == fb(0.3, -0.2) for fa, fb in zip(a, b))
    assert WeakBattery(seed=6).functions(1.0)[0](0.3, -0.2) != a[0](0.3, -0.2)


def test_ansatz_zero_hamiltonian_is_exact():
    c = dft_ansatz_compare(ZERO, 0.05, basis=FockBasis(12), n_radial=60)
    assert c.resolvent_error < 1e-12 and c.exponential_error < 1e-12


def test_ansatz_errors_are_second_order():
    a = dft_ansatz_compare(OSC, 0.02, basis=FockBasis(32), n_radial=120)
    b = dft_ansatz_compare(OSC, 0.01, basis=FockBasis(32), n_radial=120)
    assert a.resolvent_error / b.resolvent_error == pytest.approx(4.0, rel=0.1)
    assert a.exponential_error / b.exponential_error == pytest.approx(4.0, rel=0.1)


def test_ansatz_quartic_normal_records_bounds_only():
    c = dft_ansatz_compare(PRESETS["quartic"], 0.01, rule="normal", hbar=0.1)
    assert c.resolvent_error is None and c.notes
    assert c.resolvent_sup <= 1.0 + 1e-12
    assert c.exponential_sup == pytest.approx(1.0)


def test_report_csv(tmp_path):
    rep = ConvergenceReport([0.5, 0.25], [0.2, 0.1], "operator_frobenius", hbar=0.1)
    path = tmp_path / "r.csv"
    write_reports_csv([rep], path)
    rows = list(csv.reader(path.read_text().splitlines()))
    assert rows[0] == ["mesh", "error", "scheme", "rule", "hbar"]
    assert rows[1] == ["0.5", "0.20000000000000001", "backward_operator", "weyl", "0.10000000000000001"]


def test_zminus_eigenvector_helper():
    # the coherent helper used above is an eigenvector of z-^ (sanity for the fixtures)
    v = coherent(40, 0.6 - 0.3j)
    Zm = zminus_op(FockBasis(40), 1.0).entries
    assert np.allclose((Zm @ v)[:30], (0.6 - 0.3j) * v[:30], atol=1e-12)
