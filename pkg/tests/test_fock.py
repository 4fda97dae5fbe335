"""Occupation-space conventions, second-quantized operators, and rotations."""

import numpy as np
import numpy.testing as npt
import pytest

from pairmps import fock
from pairmps.fock import DenseState, OccIndex, ValidationError
from pairmps.pair import AntisymmetricMatrix, PairedState, random_two_particle_state
from pairmps.ranks import haar_unitary


def creation_matrix_bruteforce(L, p):
    """Independent dense a_p^dagger built state by state from the sign rule."""
    dim = 2**L
    M = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        bits = [(idx >> (L - 1 - k)) & 1 for k in range(L)]
        if bits[p - 1] == 0:
            sign = (-1) ** sum(bits[: p - 1])
            M[idx + 2 ** (L - p), idx] = sign
    return M


def rotate_bruteforce(state, U):
    """Exterior-algebra lift of the rotation: occupied rows of U recreated in order."""
    L = state.L
    out = np.zeros(2**L, dtype=complex)
    for idx in range(2**L):
        amp = state.coeffs[idx]
        if amp == 0:
            continue
        occupied = [k + 1 for k in range(L) if (idx >> (L - 1 - k)) & 1]
        vec = fock.vacuum_state(L)
        for k in reversed(occupied):
            vec = fock.apply_orbital_creation(vec, U[k - 1, :])
        out += amp * vec.coeffs
    return DenseState(out, L)


def test_occindex_integer_roundtrip_small_L():
    for L in range(1, 13):
        step = max(1, (2**L) // 256)  # sample densely for small L, stride for large
        for idx in range(0, 2**L, step):
            occ = OccIndex.from_index(idx, L)
            assert occ.index == idx
            assert occ.particle_number == bin(idx).count("1")


def test_occindex_full_roundtrip_L12():
    L = 12
    idx = np.arange(2**L)
    table = fock.occupation_table(L)
    back = (table * (1 << (L - 1 - np.arange(L)))).sum(axis=1)
    npt.assert_array_equal(back, idx)


def test_slater_binary_label_example():
    state = fock.slater((2, 3, 6, 8), 8)
    assert state.coeffs[OccIndex((0, 1, 1, 0, 0, 1, 0, 1)).index] == 1.0
    assert state.norm() == 1.0


def test_slater_vacuum_and_pair():
    npt.assert_array_equal(fock.slater((), 4).coeffs, fock.vacuum_state(4).coeffs)
    assert fock.slater((1, 2), 2).coeffs[OccIndex((1, 1)).index] == 1.0


def test_slater_rejects_unsorted_or_duplicate():
    with pytest.raises(ValidationError):
        fock.slater((3, 2), 4)
    with pytest.raises(ValidationError):
        fock.slater((2, 2), 4)


def test_creation_on_vacuum_and_sign():
    st = fock.apply_creation(fock.vacuum_state(2), 1)
    assert st.coeffs[OccIndex((1, 0)).index] == 1.0
    st2 = fock.apply_creation(st, 2)
    # one occupied orbital precedes p=2, so the Jordan-Wigner sign is -1
    assert st2.coeffs[OccIndex((1, 1)).index] == -1.0


def test_creation_matches_bruteforce_and_is_nilpotent():
    L, p = 6, 3
    rng = np.random.default_rng(0)
    psi = DenseState(rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L), L)
    M = creation_matrix_bruteforce(L, p)
    npt.assert_allclose(fock.apply_creation(psi, p).coeffs, M @ psi.coeffs, atol=1e-14)
    twice = fock.apply_creation(fock.apply_creation(psi, p), p)
    assert np.linalg.norm(twice.coeffs) == 0.0


def test_annihilation_is_adjoint_of_creation():
    L = 5
    for p in range(1, L + 1):
        target = creation_matrix_bruteforce(L, p).conj().T
        npt.assert_allclose(fock.annihilation_matrix(L, p).toarray(), target, atol=0)


def test_annihilation_examples():
    st = fock.apply_annihilation(fock.slater((1,), 2), 1)
    assert st.coeffs[0] == 1.0
    for p in (1, 2, 3):
        assert fock.apply_annihilation(fock.vacuum_state(3), p).norm() == 0.0


def test_car_algebra_dense_matrices():
    L = 4
    eye = np.eye(2**L)
    for p in range(1, L + 1):
        for q in range(1, L + 1):
            ap = fock.annihilation_matrix(L, p).toarray()
            aq = fock.annihilation_matrix(L, q).toarray()
            cp = fock.creation_matrix(L, p).toarray()
            cq = fock.creation_matrix(L, q).toarray()
            npt.assert_allclose(ap @ aq + aq @ ap, 0 * eye, atol=1e-12)
            npt.assert_allclose(cp @ cq + cq @ cp, 0 * eye, atol=1e-12)
            expected = eye if p == q else 0 * eye
            npt.assert_allclose(ap @ cq + cq @ ap, expected, atol=1e-12)


def test_number_operator_diagonal():
    L = 5
    N = fock.number_matrix(L).toarray()
    assert np.count_nonzero(N - np.diag(np.diag(N))) == 0
    npt.assert_array_equal(np.diag(N).real.astype(int), fock.particle_number_table(L))


def test_orbital_index_out_of_range():
    psi = fock.vacuum_state(3)
    for p in (0, 4, -1):
        with pytest.raises(ValidationError):
            fock.apply_creation(psi, p)
        with pytest.raises(ValidationError):
            fock.apply_annihilation(psi, p)


def test_dense_cap_enforced():
    with pytest.raises(ValidationError):
        fock.vacuum_state(15)


# ---------------------------------------------------------------------------
# Reduced density matrix
# ---------------------------------------------------------------------------


def test_rdm_single_determinant():
    gamma = fock.rdm(fock.slater((1, 2), 4))
    npt.assert_allclose(gamma, np.diag([1.0, 1.0, 0.0, 0.0]), atol=1e-14)


def test_rdm_two_pair_state():
    lam = (0.8, 0.6)
    gamma = fock.rdm(PairedState(lam, 4).to_dense())
    npt.assert_allclose(gamma, np.diag([0.64, 0.64, 0.36, 0.36]), atol=1e-13)
    assert np.max(np.abs(gamma - gamma.conj().T)) < 1e-12


def test_rdm_against_bruteforce_expectations():
    L = 4
    rng = np.random.default_rng(1)
    psi = random_two_particle_state(L, rng)
    gamma = fock.rdm(psi)
    for i in range(1, L + 1):
        for j in range(1, L + 1):
            op = creation_matrix_bruteforce(L, i) @ creation_matrix_bruteforce(L, j).conj().T
            expected = np.vdot(psi.coeffs, op @ psi.coeffs)
            npt.assert_allclose(gamma[i - 1, j - 1], expected, atol=1e-13)


def test_rdm_trace_equals_particle_number():
    rng = np.random.default_rng(2)
    for _ in range(5):
        psi = random_two_particle_state(8, rng)
        npt.assert_allclose(np.trace(fock.rdm(psi)).real, 2.0, atol=1e-10)


def test_rdm_warns_on_unnormalized():
    psi = DenseState(2.0 * fock.slater((1, 2), 4).coeffs, 4)
    with pytest.warns(UserWarning):
        fock.rdm(psi)


# ---------------------------------------------------------------------------
# Basis rotation
# ---------------------------------------------------------------------------


def test_rotate_identity_is_noop():
    rng = np.random.default_rng(3)
    psi = random_two_particle_state(6, rng)
    out = fock.rotate_basis(psi, np.eye(6))
    npt.assert_allclose(out.coeffs, psi.coeffs, atol=1e-12)


def test_rotation_two_particle_congruence():
    rng = np.random.default_rng(4)
    for L in (4, 6):
        psi = random_two_particle_state(L, rng)
        U = haar_unitary(L, rng)
        c = AntisymmetricMatrix.from_state(psi).matrix
        c_rot = AntisymmetricMatrix.from_state(fock.rotate_basis(psi, U)).matrix
        npt.assert_allclose(c_rot, U.T @ c @ U, atol=1e-11)


def test_rotation_norm_preservation_many_trials():
    rng = np.random.default_rng(5)
    L = 6
    for _ in range(100):
        coeffs = rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L)
        psi = DenseState(coeffs / np.linalg.norm(coeffs), L)
        out = fock.rotate_basis(psi, haar_unitary(L, rng))
        assert abs(out.norm() - 1.0) < 1e-10


def test_rdm_covariance_pinned():
    # regression pin: gamma transforms as U^dag gamma U under rotate_basis
    rng = np.random.default_rng(6)
    psi = random_two_particle_state(6, rng)
    U = haar_unitary(6, rng)
    g0 = fock.rdm(psi)
    g1 = fock.rdm(fock.rotate_basis(psi, U))
    npt.assert_allclose(g1, U.conj().T @ g0 @ U, atol=1e-10)


def test_rotation_matches_exterior_lift_all_sectors():
    L = 5
    rng = np.random.default_rng(7)
    coeffs = rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L)
    psi = DenseState(coeffs / np.linalg.norm(coeffs), L)
    U = haar_unitary(L, rng)
    fast = fock.rotate_basis(psi, U)
    slow = rotate_bruteforce(psi, U)
    npt.assert_allclose(fast.coeffs, slow.coeffs, atol=1e-11)


def test_rotation_rejects_non_unitary():
    psi = fock.slater((1, 2), 4)
    bad = np.eye(4)
    bad[0, 0] = 1.5
    with pytest.raises(ValidationError):
        fock.rotate_basis(psi, bad)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_dense_state_json_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    psi = random_two_particle_state(4, rng)
    path = tmp_path / "state.json"
    psi.save(path)
    back = DenseState.load(path)
    assert back.L == psi.L
    npt.assert_array_equal(back.coeffs, psi.coeffs)


def test_sector_extraction():
    psi = fock.slater((1, 3), 4)
    assert psi.sector_weight(2) == 1.0
    assert psi.sector_weight(1) == 0.0
    assert len(psi.sector(2)) == 6
