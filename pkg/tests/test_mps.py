"""Evaluation, sequential-SVD factorization, ranks, and canonical forms."""

import numpy as np
import numpy.testing as npt
import pytest

from pairmps import fock, mps
from pairmps.fock import DenseState, OccIndex, ValidationError
from pairmps.mps import (
    Mps,
    evaluate,
    from_dense,
    left_canonicalize,
    mps_norm,
    random_mps,
    to_dense,
    unfolding_ranks,
)
from pairmps.pair import PairedState, build_explicit_mps, random_two_particle_state


def bruteforce_cut_ranks(state, tol=1e-10):
    """Inline SVD oracle: reshape per cut, count singular values by hand."""
    ranks = []
    for k in range(1, state.L):
        s = np.linalg.svd(
            state.coeffs.reshape(2**k, 2 ** (state.L - k)), compute_uv=False
        )
        ranks.append(int(np.sum(s > tol * s[0])))
    return tuple(ranks)


def test_evaluate_indicator_chain():
    core = np.zeros((1, 2, 1), dtype=complex)
    core[0, 0, 0] = 1.0
    chain = Mps((core,) * 4)
    assert evaluate(chain, OccIndex((0, 0, 0, 0))) == 1.0
    for idx in range(1, 16):
        assert evaluate(chain, idx) == 0.0


def test_evaluate_explicit_pair_chain_by_hand():
    lam = (0.8, 0.6)
    chain = build_explicit_mps(PairedState(lam, 4))
    # hand-multiply the core slices for the two occupied patterns
    for mu, expected in (((1, 1, 0, 0), lam[0]), ((0, 0, 1, 1), lam[1])):
        vec = chain.cores[0][:, mu[0], :]
        for core, bit in zip(chain.cores[1:], mu[1:]):
            vec = vec @ core[:, bit, :]
        assert abs(vec[0, 0] - expected) < 1e-15
        assert abs(evaluate(chain, OccIndex(mu)) - expected) < 1e-15
    for idx in range(16):
        bits = OccIndex.from_index(idx, 4).bits
        if bits not in ((1, 1, 0, 0), (0, 0, 1, 1)):
            assert evaluate(chain, idx) == 0.0


def test_evaluate_agrees_with_to_dense():
    rng = np.random.default_rng(0)
    chain = random_mps(8, (2, 3, 4, 4, 4, 3, 2), rng)
    dense = to_dense(chain)
    scale = np.max(np.abs(dense.coeffs))
    for idx in rng.integers(0, 2**8, size=100):
        assert abs(evaluate(chain, int(idx)) - dense.coeffs[idx]) < 1e-13 * scale


def test_to_dense_of_indicator_chain_is_slater():
    cores = []
    for bit in (0, 1, 1, 0):
        core = np.zeros((1, 2, 1), dtype=complex)
        core[0, bit, 0] = 1.0
        cores.append(core)
    npt.assert_array_equal(to_dense(Mps(tuple(cores))).coeffs, fock.slater((2, 3), 4).coeffs)


def test_from_dense_roundtrip_random_states():
    rng = np.random.default_rng(1)
    for L in (4, 6, 8, 10):
        coeffs = rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L)
        psi = DenseState(coeffs / np.linalg.norm(coeffs), L)
        chain = from_dense(psi)
        npt.assert_allclose(to_dense(chain).coeffs, psi.coeffs, atol=1e-12)


def test_from_dense_slater_is_rank_one():
    chain = from_dense(fock.slater((1, 2), 4))
    assert chain.bond_dims() == (1, 1, 1)


def test_from_dense_generic_two_particle_ranks_pinned():
    # oracle-pinned: the interior follows 2 + min(k, L-k); both edges saturate at 2
    rng = np.random.default_rng(2)
    psi = random_two_particle_state(8, rng)
    assert bruteforce_cut_ranks(psi) == (2, 4, 5, 6, 5, 4, 2)
    assert from_dense(psi, tol=1e-10).bond_dims() == (2, 4, 5, 6, 5, 4, 2)


def test_from_dense_max_rank_cap():
    rng = np.random.default_rng(3)
    psi = random_two_particle_state(8, rng)
    chain = from_dense(psi, max_rank=3)
    assert max(chain.bond_dims()) <= 3
    per_bond = from_dense(psi, max_rank=(2, 2, 3, 2, 3, 2, 2))
    assert all(d <= c for d, c in zip(per_bond.bond_dims(), (2, 2, 3, 2, 3, 2, 2)))


def test_pair_doubling_determinant_saturates_middle_cut():
    L = 8
    phi = np.zeros((L, L // 2))
    for i in range(L // 2):
        phi[i, i] = 1.0 / np.sqrt(2.0)
        phi[i + L // 2, i] = 1.0 / np.sqrt(2.0)
    psi = fock.slater_from_orbitals(phi)
    ranks = unfolding_ranks(psi).ranks
    assert max(ranks) == 2 ** (L // 2)
    assert from_dense(psi).bond_dims()[L // 2 - 1] == 2 ** (L // 2)


def test_from_dense_zero_state_rejected():
    with pytest.raises(ValidationError):
        from_dense(fock.zero_state(4))


def test_unfolding_ranks_slater_all_ones():
    assert unfolding_ranks(fock.slater((2, 5), 6)).ranks == (1,) * 5


def test_unfolding_ranks_paired_profile():
    rng = np.random.default_rng(4)
    lam = tuple(np.sort(rng.random(4))[::-1] + 0.1)
    psi = PairedState(lam, 8).to_dense().normalized()
    assert unfolding_ranks(psi).ranks == (2, 2, 3, 2, 3, 2, 2)


def test_unfolding_ranks_match_from_dense_dims():
    rng = np.random.default_rng(5)
    for trial in range(50):
        L = int(rng.integers(4, 11))
        coeffs = rng.standard_normal(2**L) + 1j * rng.standard_normal(2**L)
        psi = DenseState(coeffs / np.linalg.norm(coeffs), L)
        report = unfolding_ranks(psi, tol=1e-10)
        assert report.ranks == from_dense(psi, tol=1e-10).bond_dims()


def test_rank_never_exceeds_cut_dimension():
    rng = np.random.default_rng(6)
    for L in (4, 6, 8):
        psi = random_two_particle_state(L, rng)
        for k, r in enumerate(unfolding_ranks(psi).ranks, start=1):
            assert r <= min(2**k, 2 ** (L - k))


def test_left_canonicalize_preserves_state_and_gauge():
    rng = np.random.default_rng(7)
    chain = random_mps(6, (2, 3, 3, 3, 2), rng)
    canon = left_canonicalize(chain)
    npt.assert_allclose(to_dense(canon).coeffs, to_dense(chain).coeffs, atol=1e-12)
    for core in canon.cores[:-1]:
        r_l, d, r_r = core.shape
        mat = core.reshape(r_l * d, r_r)
        npt.assert_allclose(mat.conj().T @ mat, np.eye(r_r), atol=1e-12)


def test_transfer_norm_matches_dense_norm():
    rng = np.random.default_rng(8)
    for _ in range(5):
        chain = random_mps(7, (2, 3, 4, 3, 2, 2), rng)
        assert abs(mps_norm(chain) - to_dense(chain).norm()) < 1e-12 * max(
            1.0, mps_norm(chain)
        )


def test_shape_chain_validation():
    good = np.zeros((1, 2, 2))
    bad = np.zeros((3, 2, 1))
    with pytest.raises(ValidationError):
        Mps((good, bad))
    with pytest.raises(ValidationError):
        Mps((np.zeros((2, 2, 1)),))


def test_mps_json_roundtrip_including_pair_sites(tmp_path):
    rng = np.random.default_rng(9)
    chain = random_mps(3, (2, 2), rng, phys_dim=4)
    path = tmp_path / "mps.json"
    chain.save(path)
    back = Mps.load(path)
    assert back.phys_dims == (4, 4, 4)
    for a, b in zip(back.cores, chain.cores):
        npt.assert_array_equal(a, b)
    npt.assert_array_equal(to_dense(back).coeffs, to_dense(chain).coeffs)


def test_rank_report_serialization():
    rng = np.random.default_rng(10)
    report = unfolding_ranks(random_two_particle_state(4, rng))
    data = report.to_dict()
    assert data["ranks"] == list(report.ranks)
    assert len(data["singular_values"]) == 3
