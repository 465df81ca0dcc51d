import numpy as np
import pytest

from dipolesim.lindblad import (
    DensityMatrix,
    SpinModelSpec,
    build_operators,
    dipole_phase_unitary,
    dissipator_apply,
    evolve,
    expectation,
    jump_operators,
    lindblad_rhs,
    polarized_state,
    spin_correlator,
    spin_matrices,
    steady_state,
    weak_symmetry_check,
)
from dipolesim.runner import STEADY_BENCH, STRONG_BENCH, WEAK_BENCH, _reachable_sector_state


def comm(a, b):
    return a @ b - b @ a


def test_spin_matrices_algebra():
    for s in (0.5, 1.0, 1.5):
        sz, sp, sm = spin_matrices(s)
        assert np.allclose(comm(sp, sm), 2 * sz, atol=1e-12)
        assert np.allclose(comm(sz, sp), sp, atol=1e-12)
        assert np.allclose(sp.conj().T, sm)
    with pytest.raises(ValueError):
        spin_matrices(0.3)


def test_spec_validation():
    with pytest.raises(ValueError):
        SpinModelSpec(rates=(("nope", 1.0),))
    with pytest.raises(ValueError):
        SpinModelSpec(rates=(("Gamma0", -1.0),))
    with pytest.raises(ValueError):
        SpinModelSpec(symmetry_mode="strong_dipole", rates=(("Gamma0", 1.0),))
    with pytest.raises(ValueError):
        SpinModelSpec(s=0.5, n_sites=7)  # 4^7 > dimension cap
    assert SpinModelSpec(s=0.5, n_sites=1).dimension == 4


def test_single_site_has_no_bonds():
    spec = SpinModelSpec(s=0.5, n_sites=1, rates=())
    ops = build_operators(spec)
    assert ops.hamiltonian.shape == (4, 4)
    assert np.all(ops.hamiltonian == 0.0)


def test_hamiltonian_conserves_charge_and_dipole():
    # J = 1, t = 0.7, L = 3: [H, Q] = [H, D] = 0 exactly
    ops = build_operators(WEAK_BENCH)
    assert np.max(np.abs(comm(ops.hamiltonian, ops.charge))) < 1e-12
    assert np.max(np.abs(comm(ops.hamiltonian, ops.dipole))) < 1e-12
    assert np.max(np.abs(ops.hamiltonian - ops.hamiltonian.conj().T)) < 1e-12


def test_all_jumps_commute_with_charge():
    for spec in (WEAK_BENCH, STRONG_BENCH):
        ops = build_operators(spec)
        for _, L, label in jump_operators(spec, ops):
            assert np.max(np.abs(comm(L, ops.charge))) < 1e-12, label


def test_weak_jump_dipole_commutators():
    # [s-_o s+_e, D] = +- the jump itself; [d-_n, D] = d-_n
    ops = build_operators(WEAK_BENCH)
    right = ops.s_m[0] @ ops.s_p[1]  # sites (1, 2): raises D by one unit
    assert np.max(np.abs(comm(right, ops.dipole) + right)) < 1e-12
    left = ops.s_m[2] @ ops.s_p[1]  # sites (3, 2): lowers D by one unit
    assert np.max(np.abs(comm(left, ops.dipole) - left)) < 1e-12
    lower = ops.d_m[1]
    assert np.max(np.abs(comm(lower, ops.dipole) - lower)) < 1e-12


def test_strong_jumps_commute_with_dipole():
    ops = build_operators(STRONG_BENCH)
    for _, L, label in jump_operators(STRONG_BENCH, ops):
        assert np.max(np.abs(comm(L, ops.dipole))) < 1e-12, label


def test_dissipator_two_level_oracle():
    # D[s-] on |up><up| = 2(|down><down| - |up><up|), by hand on 2x2
    _, _, sm = spin_matrices(0.5)
    rho_up = np.array([[1, 0], [0, 0]], dtype=complex)
    out = dissipator_apply([(1.0, sm)], rho_up)
    expect = 2.0 * (np.diag([0.0, 1.0]).astype(complex) - rho_up)
    assert np.max(np.abs(out - expect)) == 0.0


def test_dissipator_traceless_and_identity_fixed_point():
    rng = np.random.default_rng(1)
    ops = build_operators(WEAK_BENCH)
    jumps = jump_operators(WEAK_BENCH, ops)
    dim = WEAK_BENCH.dimension
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    out = dissipator_apply(jumps, rho)
    assert abs(np.trace(out)) < 1e-12
    # a Hermitian jump leaves the maximally mixed state invariant
    sz, _, _ = spin_matrices(0.5)
    eye = np.eye(2, dtype=complex) / 2
    assert np.max(np.abs(dissipator_apply([(1.0, sz)], eye))) == 0.0


def test_evolve_identity_without_generator():
    spec = SpinModelSpec(s=0.5, n_sites=2, coupling_j=0.0, coupling_t=0.0, rates=())
    rho0 = _reachable_sector_state(spec)
    rho0 = 0.5 * (rho0 + rho0.conj().T)  # match the evolver's re-Hermitization
    out = evolve(rho0, spec, 1.0, dt=0.05)
    assert np.max(np.abs(out.matrix - rho0)) == 0.0


def test_evolve_preserves_density_matrix_properties():
    rng = np.random.default_rng(3)
    dim = WEAK_BENCH.dimension
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho0 = a @ a.conj().T
    rho0 /= np.trace(rho0).real
    out = evolve(rho0, WEAK_BENCH, 2.0, dt=0.02)
    DensityMatrix(out.matrix).validate()


def test_evolve_dt_halving_consistency():
    rng = np.random.default_rng(4)
    dim = STEADY_BENCH.dimension
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho0 = a @ a.conj().T
    rho0 /= np.trace(rho0).real
    coarse = evolve(rho0, STEADY_BENCH, 3.0, dt=0.02).matrix
    fine = evolve(rho0, STEADY_BENCH, 3.0, dt=0.01).matrix
    assert np.max(np.abs(coarse - fine)) < 1e-7  # RK4: O(dt^4)


def test_charge_conserved_along_evolution():
    rng = np.random.default_rng(5)
    for spec in (WEAK_BENCH, STRONG_BENCH):
        ops = build_operators(spec)
        dim = spec.dimension
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho0 = a @ a.conj().T
        rho0 /= np.trace(rho0).real
        out = evolve(rho0, spec, 5.0, dt=0.02, ops=ops)
        drift = abs(expectation(out.matrix, ops.charge) - expectation(rho0, ops.charge))
        assert drift < 1e-8
        if spec.symmetry_mode == "strong_dipole":
            d_drift = abs(expectation(out.matrix, ops.dipole) - expectation(rho0, ops.dipole))
            assert d_drift < 1e-8


def test_polarized_steady_state_from_reachable_sector():
    # J = t = 0, pair flips only: odd sites fully down, even fully up
    spec = STEADY_BENCH
    ops = build_operators(spec)
    rho0 = _reachable_sector_state(spec)
    rho_inf = steady_state(spec, rho0, method="evolve")
    assert expectation(rho_inf.matrix, ops.s_z[0]) == pytest.approx(-0.5, abs=1e-8)
    assert expectation(rho_inf.matrix, ops.d_z[0]) == pytest.approx(-0.5, abs=1e-8)
    assert expectation(rho_inf.matrix, ops.s_z[1]) == pytest.approx(0.5, abs=1e-8)
    assert expectation(rho_inf.matrix, ops.d_z[1]) == pytest.approx(0.5, abs=1e-8)
    # total charge of the polarized state vanishes
    assert expectation(rho_inf.matrix, ops.charge) == pytest.approx(0.0, abs=1e-8)
    # stationarity: evolving the steady state does not move it
    again = evolve(rho_inf.matrix, spec, 5.0, dt=0.02)
    assert np.max(np.abs(again.matrix - rho_inf.matrix)) < 1e-8


def test_steady_state_methods_agree():
    spec = STEADY_BENCH
    rho0 = _reachable_sector_state(spec)
    via_evolve = steady_state(spec, rho0, method="evolve")
    via_null = steady_state(spec, rho0, method="nullspace")
    assert np.linalg.norm(via_evolve.matrix - via_null.matrix) < 1e-6
    ref = polarized_state(spec)
    assert np.max(np.abs(via_evolve.matrix - ref)) < 1e-8


def test_zero_generator_any_state_stationary():
    spec = SpinModelSpec(s=0.5, n_sites=2, coupling_j=0.0, coupling_t=0.0, rates=())
    ops = build_operators(spec)
    rho0 = _reachable_sector_state(spec)
    resid = np.linalg.norm(lindblad_rhs(ops.hamiltonian, [], rho0))
    assert resid == 0.0


@pytest.mark.parametrize("beta0", [0.37, 1.1])
def test_weak_dipole_adjoint_covariance(beta0):
    ops = build_operators(WEAK_BENCH)
    dev = weak_symmetry_check(WEAK_BENCH, ops.dipole, beta0, ops)
    assert dev <= 1e-10


def test_weak_charge_adjoint_covariance():
    # strong symmetry implies weak: the charge rotation also commutes
    ops = build_operators(WEAK_BENCH)
    assert weak_symmetry_check(WEAK_BENCH, ops.charge, 0.7, ops) <= 1e-10


def test_lone_lowering_jump_keeps_weak_symmetry():
    # a single eigenoperator jump (fixed dipole transfer) cannot break the
    # weak symmetry: U L U^dag is a pure phase times L, so the dissipator
    # commutes with the adjoint action exactly
    ops = build_operators(WEAK_BENCH)
    jumps = jump_operators(WEAK_BENCH, ops) + [(0.4, ops.s_m[1], "s-_2 alone")]
    dev = weak_symmetry_check(WEAK_BENCH, ops.dipole, 0.37, ops, jumps)
    assert dev <= 1e-10


def test_coherent_hop_mix_breaks_weak_symmetry():
    # a sum of two hops with opposite dipole transfer is not an
    # eigenoperator; the detector must fire well above its tolerance
    ops = build_operators(WEAK_BENCH)
    mixed = ops.s_m[0] @ ops.s_p[1] + ops.s_m[2] @ ops.s_p[1]
    jumps = jump_operators(WEAK_BENCH, ops) + [(0.5, mixed, "hop mix")]
    dev = weak_symmetry_check(WEAK_BENCH, ops.dipole, 0.37, ops, jumps)
    assert dev > 1e-3


def test_dipole_sector_block_preservation():
    # states commuting with U_D stay block diagonal along the evolution
    ops = build_operators(WEAK_BENCH)
    rng = np.random.default_rng(8)
    diag = rng.random(WEAK_BENCH.dimension)
    rho0 = np.diag(diag / diag.sum()).astype(complex)
    u = dipole_phase_unitary(ops, 0.37)
    assert np.max(np.abs(rho0 @ u - u @ rho0)) < 1e-14
    out = evolve(rho0, WEAK_BENCH, 3.0, dt=0.02, ops=ops)
    assert np.max(np.abs(out.matrix @ u - u @ out.matrix)) < 1e-8


def test_expectation_and_correlator():
    spec = STEADY_BENCH
    ops = build_operators(spec)
    dim = spec.dimension
    mixed = np.eye(dim, dtype=complex) / dim
    assert expectation(mixed, ops.s_z[0]) == pytest.approx(0.0)
    val = expectation(polarized_state(spec), ops.charge)
    assert val == pytest.approx(0.0, abs=1e-12)  # one site +1/2, one -1/2
    assert isinstance(val, float)  # Hermitian operators give real values
    c = spin_correlator(polarized_state(spec), ops, 2)
    assert abs(c.imag) < 1e-12
