"""Finite matrix-product-state machinery.

Evaluation, dense conversion, sequential-SVD factorization, left
canonicalization and unfolding-rank reports.  Cores are order-3 arrays of
shape ``(r_left, d, r_right)``; the physical dimension ``d`` is usually 2
(one orbital per site) but may be any power of two, which lets the same
container hold pair-site tensors with ``d = 4``.

Unfoldings use the same bit order as :mod:`pairmps.fock`: the first site is
the most significant bit of the dense index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fock import DENSE_ORBITAL_CAP, DenseState, OccIndex, ValidationError

#: Relative singular-value threshold used by rank reports.
RANK_TOL = 1e-10

#: Relative truncation threshold of the sequential-SVD factorization.
SVD_TOL = 1e-12


@dataclass(frozen=True)
class Mps:
    """Ordered chain of order-3 cores with matching bond dimensions."""

    cores: tuple

    def __post_init__(self):
        cores = tuple(np.array(c, dtype=np.complex128) for c in self.cores)
        if not cores:
            raise ValidationError("an MPS needs at least one core")
        for i, core in enumerate(cores):
            if core.ndim != 3:
                raise ValidationError(f"core {i} has ndim {core.ndim}, expected 3")
            d = core.shape[1]
            if d < 1 or (d & (d - 1)) != 0:
                raise ValidationError(f"core {i} physical dimension {d} is not a power of 2")
            core.flags.writeable = False
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValidationError("boundary bond dimensions must be 1")
        for left, right in zip(cores[:-1], cores[1:]):
            if left.shape[2] != right.shape[0]:
                raise ValidationError(
                    f"bond mismatch: {left.shape} does not chain into {right.shape}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def n_sites(self) -> int:
        return len(self.cores)

    @property
    def phys_dims(self) -> tuple:
        return tuple(core.shape[1] for core in self.cores)

    @property
    def n_bits(self) -> int:
        """Total number of occupation bits encoded by the chain."""
        return int(sum(int(np.log2(d)) for d in self.phys_dims))

    def bond_dims(self) -> tuple:
        """Interior bond dimensions (r_1, ..., r_{n_sites-1})."""
        return tuple(core.shape[2] for core in self.cores[:-1])

    def to_dict(self) -> dict:
        return {
            "L": self.n_bits,
            "cores": [
                {
                    "shape": list(core.shape),
                    "data": [
                        [float(z.real), float(z.imag)] for z in core.reshape(-1)
                    ],
                }
                for core in self.cores
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mps":
        cores = []
        for entry in data["cores"]:
            flat = np.array([complex(re, im) for re, im in entry["data"]])
            cores.append(flat.reshape(entry["shape"]))
        return cls(tuple(cores))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Mps":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _site_digits(mps: Mps, mu) -> list:
    """Split occupation bits across the chain's physical dimensions."""
    if isinstance(mu, OccIndex):
        bits = list(mu.bits)
    elif isinstance(mu, (int, np.integer)):
        bits = list(OccIndex.from_index(int(mu), mps.n_bits).bits)
    else:
        bits = [int(b) for b in mu]
    if len(bits) != mps.n_bits:
        raise ValidationError(
            f"occupation string has {len(bits)} bits, MPS encodes {mps.n_bits}"
        )
    digits = []
    pos = 0
    for d in mps.phys_dims:
        width = int(np.log2(d))
        value = 0
        for b in bits[pos : pos + width]:
            value = (value << 1) | b
        digits.append(value)
        pos += width
    return digits


def evaluate(mps: Mps, mu) -> complex:
    """Coefficient of one basis state: the chained product of core slices."""
    digits = _site_digits(mps, mu)
    vec = mps.cores[0][:, digits[0], :]
    for core, digit in zip(mps.cores[1:], digits[1:]):
        vec = vec @ core[:, digit, :]
    return complex(vec[0, 0])


def to_dense(mps: Mps) -> DenseState:
    """Contract the chain left to right into a dense coefficient vector."""
    L = mps.n_bits
    if L > DENSE_ORBITAL_CAP:
        raise ValidationError(f"dense conversion capped at {DENSE_ORBITAL_CAP} bits")
    block = mps.cores[0].reshape(mps.cores[0].shape[1], mps.cores[0].shape[2])
    for core in mps.cores[1:]:
        block = np.tensordot(block, core, axes=(1, 0))
        block = block.reshape(block.shape[0] * block.shape[1], block.shape[2])
    return DenseState(block[:, 0], L)


def from_dense(state: DenseState, max_rank=None, tol: float = SVD_TOL) -> Mps:
    """Sequential-SVD factorization into phys-dim-2 cores.

    Singular values below ``tol`` times the largest one at each cut are
    discarded, so with ``max_rank`` unset the bond dimensions reproduce the
    unfolding ranks of the input at the same relative threshold.  ``max_rank``
    caps the kept ranks, either uniformly (int) or per bond (sequence of
    length L - 1).
    """
    if state.norm() == 0.0:
        raise ValidationError("cannot factorize the zero state")
    L = state.L
    if max_rank is None:
        caps = [None] * (L - 1)
    elif np.isscalar(max_rank):
        caps = [int(max_rank)] * (L - 1)
    else:
        caps = [int(r) for r in max_rank]
        if len(caps) != L - 1:
            raise ValidationError(f"need {L - 1} rank caps, got {len(caps)}")
    cores = []
    remainder = state.coeffs.reshape(1, -1)
    r_left = 1
    for cap in caps:
        matrix = remainder.reshape(r_left * 2, -1)
        u, s, vh = np.linalg.svd(matrix, full_matrices=False)
        keep = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 1
        keep = max(keep, 1)
        if cap is not None:
            keep = min(keep, cap)
        cores.append(u[:, :keep].reshape(r_left, 2, keep))
        remainder = s[:keep, None] * vh[:keep, :]
        r_left = keep
    cores.append(remainder.reshape(r_left, 2, 1))
    return Mps(tuple(cores))


@dataclass(frozen=True)
class RankReport:
    """Per-cut Schmidt ranks of a dense state, with the singular values behind them."""

    ranks: tuple
    singular_values: tuple
    tol: float

    def to_dict(self) -> dict:
        return {
            "ranks": list(self.ranks),
            "singular_values": [[float(s) for s in sv] for sv in self.singular_values],
            "tol": self.tol,
        }


def unfolding_ranks(state: DenseState, tol: float = RANK_TOL) -> RankReport:
    """Ranks of the cut-k unfoldings ``C^{mu_1..mu_k}_{mu_{k+1}..mu_L}``.

    Each unfolding is the coefficient vector reshaped to ``2**k x 2**(L-k)``
    with the first k bits as the row index; the rank counts singular values
    above ``tol`` times the cut's largest singular value.
    """
    L = state.L
    ranks = []
    spectra = []
    for k in range(1, L):
        matrix = state.coeffs.reshape(2**k, 2 ** (L - k))
        s = np.linalg.svd(matrix, compute_uv=False)
        spectra.append(s)
        if s.size == 0 or s[0] == 0.0:
            ranks.append(0)
        else:
            ranks.append(int(np.count_nonzero(s > tol * s[0])))
    return RankReport(tuple(ranks), tuple(spectra), tol)


def left_canonicalize(mps: Mps) -> Mps:
    """Same state with ``sum_mu A[mu]^+ A[mu] = 1`` on every core but the last."""
    cores = [np.array(c) for c in mps.cores]
    for i in range(len(cores) - 1):
        r_l, d, r_r = cores[i].shape
        q, r = np.linalg.qr(cores[i].reshape(r_l * d, r_r))
        cores[i] = q.reshape(r_l, d, q.shape[1])
        cores[i + 1] = np.tensordot(r, cores[i + 1], axes=(1, 0))
    return Mps(tuple(cores))


def mps_norm(mps: Mps) -> float:
    """State norm from transfer-matrix contractions (no dense expansion)."""
    env = np.ones((1, 1), dtype=complex)
    for core in mps.cores:
        # env' = sum_mu A[mu]^+ env A[mu]
        tmp = np.tensordot(env, core, axes=(1, 0))  # (bar_l, mu, r)
        env = np.tensordot(core.conj(), tmp, axes=([0, 1], [0, 1]))
    return float(np.sqrt(abs(env[0, 0])))


def random_mps(L: int, bond_dims, rng, phys_dim: int = 2) -> Mps:
    """Gaussian random MPS with the given interior bond dimensions."""
    dims = [1, *bond_dims, 1]
    if len(dims) != L + 1:
        raise ValidationError(f"need {L - 1} interior bond dimensions, got {len(dims) - 2}")
    cores = []
    for i in range(L):
        shape = (dims[i], phys_dim, dims[i + 1])
        cores.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return Mps(tuple(cores))
