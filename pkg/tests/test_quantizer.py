import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omegapath.phase_grid import PhaseGrid, Symbol
from omegapath.polynomial import PolySymbol
from omegapath.quantizer import (
    FockBasis,
    MonomialOp,
    OperatorMatrix,
    PositionBasis,
    TruncationError,
    ccr_normal_form,
    dequantize,
    dequantize_polynomial,
    green_function,
    identity_op,
    interior,
    interior_error,
    momentum_op,
    normal_form_matrix,
    ordering_table_errors,
    position_op,
    quantize_monomial,
    quantize_poly,
    quantize_symbol,
    trace_pairing,
    zminus_op,
    zplus_op,
)

N = 40


def ops(hbar=1.0, basis=None):
    basis = basis or FockBasis(N)
    return position_op(basis, hbar).entries, momentum_op(basis, hbar).entries


def close_interior(a, b, cut, tol=1e-10):
    a = a.entries if isinstance(a, OperatorMatrix) else a
    b = b.entries if isinstance(b, OperatorMatrix) else b
    return interior_error(a, b, cut) <= tol * max(1.0, np.linalg.norm(interior(b, cut)))


def bump(hbar, q0=0.2, p0=-0.3, var=1.0):
    s = np.sqrt(hbar)
    return lambda q, p: np.exp(-((q - q0 * s) ** 2 + (p - p0 * s) ** 2) / (2 * var * hbar))


# ladder matrices and the CCR


@pytest.mark.parametrize("hbar", [1.0, 0.3])
def test_ladder_commutator_exact(hbar):
    b = FockBasis(16)
    zm, zp = zminus_op(b, hbar).entries, zplus_op(b, hbar).entries
    comm = zm @ zp - zp @ zm
    assert np.allclose(comm[:15, :15], hbar * np.eye(15), atol=1e-14)
    assert np.allclose(zp, zm.conj().T)


@pytest.mark.parametrize("basis", [FockBasis(48), PositionBasis(128, 12.0)], ids=["fock", "position"])
def test_canonical_commutator(basis):
    hbar = 0.7
    Q, P = ops(hbar, basis)
    comm = Q @ P - P @ Q
    if isinstance(basis, FockBasis):
        assert np.allclose(interior(comm, 1), 1j * hbar * np.eye(47), atol=1e-13)
    else:
        # on the position lattice the CCR holds on states resolved by both x and k grids
        x = basis.x
        psi = np.exp(-x * x / (2 * hbar)) * (1 + x)
        assert np.allclose(comm @ psi, 1j * hbar * psi, atol=1e-10)


def test_operator_matrix_validation():
    with pytest.raises(ValueError):
        OperatorMatrix(FockBasis(4), np.eye(4))
    with pytest.raises(ValueError):
        OperatorMatrix(FockBasis(8), np.eye(9))


# the ordering table


def test_standard_qp():
    Q, P = ops()
    assert close_interior(quantize_monomial(MonomialOp(1, 1), "standard", FockBasis(N)), Q @ P, 2)


def test_weyl_qp():
    Q, P = ops()
    assert close_interior(quantize_monomial(MonomialOp(1, 1), "weyl", FockBasis(N)), (Q @ P + P @ Q) / 2, 2)


@pytest.mark.parametrize("hbar", [1.0, 0.25])
def test_born_jordan_qp2(hbar):
    Q, P = ops(hbar)
    got = quantize_monomial(MonomialOp(1, 2), "born-jordan", FockBasis(N), hbar)
    expect = Q @ P @ P - 1j * hbar * P
    assert close_interior(got, (P @ P @ Q + P @ Q @ P + Q @ P @ P) / 3, 3)
    assert close_interior(got, expect, 3)
    assert close_interior(quantize_monomial(MonomialOp(1, 2), "weyl", FockBasis(N), hbar), expect, 3)


def test_qp_rows_cross_check():
    hbar = 0.6
    Q, P = ops(hbar)
    b = FockBasis(N)
    sym = (Q @ P + P @ Q) / 2
    for rule in ("weyl", "symmetric", "born-jordan"):
        assert close_interior(quantize_monomial(MonomialOp(1, 1), rule, b, hbar), sym, 2)
    one = np.eye(N)
    assert close_interior(quantize_monomial(MonomialOp(1, 1), "standard", b, hbar), sym + 0.5j * hbar * one, 2)
    assert close_interior(quantize_monomial(MonomialOp(1, 1), "antistandard", b, hbar), sym - 0.5j * hbar * one, 2)


def test_normal_and_antinormal_of_ladder_monomial():
    hbar = 0.5
    b = FockBasis(N)
    zp, zm = zplus_op(b, hbar).entries, zminus_op(b, hbar).entries
    # z+ z- as a ladder monomial: the classical variable (q - ip)/sqrt2 quantizes to z+^
    mono = MonomialOp(1, 1, kind="ladder")
    assert close_interior(quantize_monomial(mono, "normal", b, hbar), zp @ zm, 2)
    assert close_interior(quantize_monomial(mono, "antinormal", b, hbar), zm @ zp, 2)
    assert close_interior(quantize_monomial(MonomialOp(1, 0, kind="ladder"), "weyl", b, hbar), zp, 1)


def test_every_table_row_against_ccr_reduction():
    rows = ordering_table_errors(max_degree=4, N=48, hbar=0.8)
    assert len(rows) == 7 * 15
    assert max(r["rel_error"] for r in rows) < 1e-12


def test_ccr_reduction_small_words():
    assert ccr_normal_form("aA") == {(1, 1): 1.0, (0, 0): 1.0}
    # q p - p q = i hbar
    qp, pq = ccr_normal_form("qp", 0.4), ccr_normal_form("pq", 0.4)
    diff = {k: qp.get(k, 0) - pq.get(k, 0) for k in set(qp) | set(pq)}
    assert diff[(0, 0)] == pytest.approx(0.4j)
    assert all(abs(v) < 1e-15 for k, v in diff.items() if k != (0, 0))
    np.testing.assert_allclose(normal_form_matrix({(1, 1): 1.0}, 6), np.diag(np.arange(6.0)))


def test_monomial_guards():
    with pytest.raises(ValueError):
        MonomialOp(4, 3)
    with pytest.raises(ValueError):
        MonomialOp(-1, 0)
    with pytest.raises(TruncationError):
        quantize_monomial(MonomialOp(3, 3), "weyl", FockBasis(9))
    with pytest.raises(KeyError):
        quantize_monomial(MonomialOp(1, 0), "lexicographic", FockBasis(N))


# grid symbols


def test_constant_quantizes_to_identity():
    g = PhaseGrid.default(1.0, n=128, width=16.0)
    A = quantize_symbol(g.sample(lambda q, p: np.ones_like(q)), FockBasis(24))
    assert close_interior(A, np.eye(24), 0, tol=1e-10)


@pytest.mark.parametrize("hbar", [1.0, 0.2])
def test_oscillator_diagonal(hbar):
    g = PhaseGrid.default(hbar, n=128, width=16.0)
    b = FockBasis(24)
    A = quantize_symbol(g.sample(lambda q, p: (q * q + p * p) / 2), b)
    zp, zm = zplus_op(b, hbar).entries, zminus_op(b, hbar).entries
    oracle = (zp @ zm + zm @ zp) / 2
    assert close_interior(A, oracle, 1, tol=1e-9)
    np.testing.assert_allclose(np.diag(A.entries)[:23].real, hbar * (np.arange(23) + 0.5), atol=1e-9 * hbar)


def test_grid_quantization_matches_table_on_polynomials():
    hbar = 0.5
    g = PhaseGrid.default(hbar, n=128, width=16.0)
    b = FockBasis(20)
    for n, m in [(1, 0), (0, 1), (1, 1), (2, 1), (0, 3)]:
        A = quantize_symbol(g.sample(lambda q, p: q**n * p**m), b)
        B = quantize_monomial(MonomialOp(n, m), "weyl", b, hbar)
        assert close_interior(A, B, 4, tol=1e-8), (n, m)


def test_non_weyl_symbols_are_converted_first():
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=96, width=12.0)
    f = g.sample(bump(hbar, var=2.0), ordering="normal")
    A = quantize_symbol(f, FockBasis(32))
    # the normal symbol of a projector-free Gaussian matches its own table rule via the ladder oracle
    from omegapath.omega import convert_symbol

    B = quantize_symbol(convert_symbol(f, "normal", "weyl"), FockBasis(32))
    assert close_interior(A, B, 0, tol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.8, 2.0), st.floats(-1, 1), st.floats(-1, 1))
def test_real_symbols_quantize_to_hermitian(q0, p0, var, a, b):
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=96, width=12.0)
    f = g.sample(lambda q, p: bump(hbar, q0, p0, var)(q, p) * (1 + a * q + b * p * p))
    A = quantize_symbol(f, FockBasis(32)).entries
    anti = interior(A - A.conj().T, 4)
    assert np.linalg.norm(anti) / np.linalg.norm(interior(A, 4)) < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_linearity(alpha, beta):
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=64, width=12.0)
    f, h = g.sample(bump(hbar)), g.sample(bump(hbar, -0.5, 0.4, 1.5))
    b = FockBasis(24)
    lhs = quantize_symbol(Symbol(g, alpha * f.values + beta * h.values), b).entries
    rhs = alpha * quantize_symbol(f, b).entries + beta * quantize_symbol(h, b).entries
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-13 * (1 + abs(alpha) + abs(beta)))


def test_truncation_guard():
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=96, width=14.0)
    # a bump far from the origin lives on high Fock levels
    with pytest.raises(TruncationError):
        quantize_symbol(g.sample(bump(hbar, 6.0, 0.0, 0.5)), FockBasis(12))


def test_displacement_route_agrees_on_leading_levels():
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=128, width=10.0)
    f = g.sample(bump(hbar, var=1.5))
    A = quantize_symbol(f, FockBasis(48), method="kernel").entries
    B = quantize_symbol(f, FockBasis(48), method="displacement", truncation_check=False).entries
    assert np.abs(A[:16, :16] - B[:16, :16]).max() < 1e-8


def test_fock_and_position_bases_share_spectra():
    hbar = 0.5
    H = PolySymbol(np.array([[0, 0, 0.5, 0, 0], [0.0] * 5, [0.5, 0, 0, 0, 0], [0.0] * 5, [0.1, 0, 0, 0, 0]],
                            dtype=complex), hbar, "weyl")
    fock = np.linalg.eigvalsh(quantize_poly(H, FockBasis(120)).entries[:100, :100])[:5]
    pos = np.linalg.eigvalsh(quantize_poly(H, PositionBasis(128, 8.0)).entries)[:5]
    np.testing.assert_allclose(fock, pos, rtol=1e-4)
    assert fock[0] > 0.25 * hbar


# dequantization


def test_dequantize_identity():
    # exact route: a truncated identity is a projector whose grid Weyl symbol alternates near the origin
    for rule in ("weyl", "normal", "antinormal", "born-jordan"):
        assert dequantize_polynomial(identity_op(FockBasis(24), 1.0), rule).allclose(
            PolySymbol.constant(1.0, 1.0, rule))
    assert dequantize_polynomial(identity_op(FockBasis(24), 1.0), "antinormal").allclose(
        PolySymbol.constant(1.0, 1.0, "antinormal"))


def test_dequantize_number_operator():
    hbar = 0.6
    b = FockBasis(24)
    Nz = zplus_op(b, hbar) @ zminus_op(b, hbar)
    zz = PolySymbol(np.array([[0, 0, 0.5], [0, 0, 0], [0.5, 0, 0]], dtype=complex), hbar, "weyl")
    assert dequantize_polynomial(Nz, "normal", 2).allclose(zz.replace(ordering="normal"))
    assert dequantize_polynomial(Nz, "weyl", 2).allclose(zz - hbar / 2)
    with pytest.raises(TruncationError):
        dequantize_polynomial(OperatorMatrix(b, np.diag(np.arange(24.0) ** 3), hbar), "normal", 2)


@settings(max_examples=10, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(1.0, 2.0),
       st.sampled_from(["weyl", "standard", "normal"]))
def test_dequantize_round_trip(q0, p0, var, rule):
    hbar = 1.0
    # 64 levels need dq small enough to resolve the top Weyl-kernel oscillation
    g = PhaseGrid.default(hbar, n=128, width=12.0)
    f = g.sample(bump(hbar, q0, p0, var))
    A = quantize_symbol(f, FockBasis(64))
    back = dequantize(A, "weyl", g)
    m = g.interior_mask()
    assert np.abs(back.values - f.values)[m].max() / np.abs(f.values).max() < 1e-6
    assert back.meta["roundtrip_error"] < 1e-6
    if rule != "weyl":
        from omegapath.omega import convert_symbol

        other = dequantize(A, rule, g)
        assert other.ordering == rule
        assert np.abs(other.values - convert_symbol(f, "weyl", rule).values)[m].max() < 1e-6


def test_position_basis_round_trip():
    hbar = 1.0
    g = PhaseGrid(96, 96, 8.0, 8.0, hbar)
    f = g.sample(bump(hbar, var=1.2))
    A = quantize_symbol(f, PositionBasis(96, 8.0))
    back = dequantize(A, "weyl", g)
    assert np.abs(back.values - f.values).max() < 1e-8


def test_dequantize_rejects_unhostable_operator():
    g = PhaseGrid.default(1.0, n=32, width=4.0)
    A = OperatorMatrix(FockBasis(48), np.diag(np.arange(48.0) ** 2), 1.0)
    with pytest.raises(Exception):
        dequantize(A, "weyl", g)


# the trace formula


def ground_projector(hbar, g):
    return g.sample(lambda q, p: 2 * np.exp(-(q * q + p * p) / hbar))


@pytest.mark.parametrize("hbar", [1.0, 0.3])
def test_ground_state_projector_trace(hbar):
    g = PhaseGrid.default(hbar, n=96, width=12.0)
    P0 = ground_projector(hbar, g)
    assert trace_pairing(P0, P0) == pytest.approx(1.0, abs=1e-12)
    # the matrix side: the projector quantizes to |0><0|
    A = quantize_symbol(P0, FockBasis(16)).entries
    e0 = np.zeros((16, 16))
    e0[0, 0] = 1
    assert np.abs(A - e0).max() < 1e-12


def test_trace_of_identity_pairing():
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=128, width=12.0)
    rho = g.sample(bump(hbar))
    one = g.sample(lambda q, p: np.ones_like(q))
    expect = np.sum(rho.values) * g.liouville_weight
    assert trace_pairing(one, rho) == pytest.approx(expect, rel=1e-14)
    assert trace_pairing(one, rho) == pytest.approx(np.trace(quantize_symbol(rho, FockBasis(48)).entries), rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.sampled_from(["weyl", "standard", "antistandard", "normal", "antinormal"]))
def test_trace_pairing_matches_matrix_trace(a, b, c, d, rule):
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=128, width=12.0)
    f = g.sample(lambda q, p: bump(hbar, a, b, 1.5)(q, p) * (1 + 0.3 * q))
    rho = g.sample(bump(hbar, c, d, 2.0))
    basis = FockBasis(64)
    tr = np.trace(quantize_symbol(f, basis).entries @ quantize_symbol(rho, basis).entries)
    from omegapath.omega import convert_symbol

    fr, rr = convert_symbol(f, "weyl", rule), convert_symbol(rho, "weyl", rule)
    got = trace_pairing(fr, rr, pairing="plain" if rule == "weyl" else "dual")
    assert abs(got - tr) <= 1e-6 * abs(tr)


def test_trace_pairing_requires_matching_orderings():
    g = PhaseGrid.default(1.0, n=32)
    with pytest.raises(ValueError):
        trace_pairing(g.sample(bump(1.0)), g.sample(bump(1.0), ordering="normal"))


# coordinate kernels


def hermite_functions(K, x, hbar):
    out = np.zeros((K,) + np.shape(x))
    y = x / np.sqrt(hbar)
    out[0] = np.exp(-y * y / 2) / (np.pi * hbar) ** 0.25
    out[1] = np.sqrt(2) * y * out[0]
    for j in range(2, K):
        out[j] = np.sqrt(2 / j) * y * out[j - 1] - np.sqrt((j - 1) / j) * out[j - 2]
    return out


def test_green_function_of_identity_is_a_ridge():
    hbar = 1.0
    g = PhaseGrid.default(hbar, n=64, width=10.0)
    G = green_function(g.sample(lambda q, p: np.ones_like(q), ordering="standard"))
    assert np.all(np.argmax(np.abs(G), axis=1) == np.arange(64))
    assert np.allclose(np.diag(G), 2 * g.L_p / (2 * np.pi * hbar))


def test_green_function_of_multiplication_operator():
    hbar, eps = 0.5, 0.3
    g = PhaseGrid.default(hbar, n=64, width=10.0)
    G = green_function(g.sample(lambda q, p: np.exp(-1j * eps * q * q / hbar) + 0 * p, ordering="standard"))
    ridge = np.diag(G)
    expect = np.exp(-1j * eps * g.q**2 / hbar) * 2 * g.L_p / (2 * np.pi * hbar)
    assert np.allclose(ridge, expect, atol=1e-12)
    assert np.all(np.argmax(np.abs(G), axis=1) == np.arange(64))


@pytest.mark.parametrize("tau", [0.3, 0.5])
def test_green_function_euclidean_oscillator(tau):
    # imaginary-time propagator e^{-tau H/hbar}, H = (q^2 + p^2)/2; real time is not resolvable on a
    # finite lattice (neither the symbol nor the kernel decays)
    hbar, K = 1.0, 120
    g = PhaseGrid.default(hbar, n=128, width=14.0)
    q, p = g.q, g.p
    E = np.exp(-tau * (np.arange(K) + 0.5))
    Pq = hermite_functions(K, q, hbar)
    Pp = hermite_functions(K, p, hbar) * (1j ** np.arange(K))[:, None]  # <k|p>
    u = np.einsum("k,kq,kp->qp", E, Pq, Pp) * np.sqrt(2 * np.pi * hbar) * np.exp(-1j * np.outer(q, p) / hbar)
    G = green_function(Symbol(g, u, ordering="standard"))
    ref = np.einsum("k,ka,kb->ab", E, Pq, Pq)
    # the eigendecomposition oracle agrees with the closed-form Mehler kernel
    x, y = np.meshgrid(q, q, indexing="ij")
    sh, ch = np.sinh(tau), np.cosh(tau)
    mehler = np.exp(-((x * x + y * y) * ch - 2 * x * y) / (2 * hbar * sh)) / np.sqrt(2 * np.pi * hbar * sh)
    m = np.abs(q) < 4
    box = np.ix_(m, m)
    assert np.abs(ref - mehler)[box].max() < 1e-10
    assert np.abs(G - ref)[box].max() / np.abs(ref).max() < 1e-5


def test_green_function_needs_standard_symbol():
    g = PhaseGrid.default(1.0, n=32)
    with pytest.raises(ValueError):
        green_function(g.sample(bump(1.0)))
