"""Occupation-number representation of fermionic Fock space on L spin orbitals.

Conventions, pinned by regression tests:

* A basis state is an occupation string ``(mu_1, ..., mu_L)`` with
  ``mu_i in {0, 1}``.  ``mu_1`` is the MOST significant bit of the integer
  index, ``index = sum_i mu_i * 2**(L - i)``.
* Orbital indices are 1-based (``p = 1 .. L``), matching the usual
  quantum-chemistry numbering.
* ``apply_creation`` carries the Jordan-Wigner sign
  ``(-1)**(number of occupied orbitals with index < p)``, so Slater
  determinants built in increasing orbital order have coefficient +1.
* ``rotate_basis(state, U)`` is the particle-number-conserving Fock-space
  rotation whose action on a two-particle coefficient matrix ``c`` is the
  congruence ``c -> U.T @ c @ U``, and on the one-particle reduced density
  matrix is ``gamma -> U.conj().T @ gamma @ U``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

#: Largest orbital count for which dense coefficient vectors are allowed.
DENSE_ORBITAL_CAP = 14

UNITARY_TOL = 1e-10


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def _check_dense_cap(L: int) -> None:
    if not 1 <= L <= DENSE_ORBITAL_CAP:
        raise ValidationError(
            f"orbital count L={L} outside supported dense range 1..{DENSE_ORBITAL_CAP}"
        )


def _check_orbital(p: int, L: int) -> None:
    if not 1 <= p <= L:
        raise ValidationError(f"orbital index {p} out of range 1..{L}")


@lru_cache(maxsize=None)
def occupation_table(L: int) -> np.ndarray:
    """(2**L, L) table of occupation bits; column ``i`` is orbital ``i+1``."""
    _check_dense_cap(L)
    idx = np.arange(2**L, dtype=np.int64)
    shifts = L - 1 - np.arange(L)
    table = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=None)
def particle_number_table(L: int) -> np.ndarray:
    """Particle number N(mu) for every basis index."""
    table = occupation_table(L).sum(axis=1).astype(np.int64)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=None)
def jw_parity_table(L: int) -> np.ndarray:
    """(2**L, L) parities; column p-1 holds ``sum_{i<p} mu_i mod 2``."""
    occ = occupation_table(L)
    cum = np.zeros((2**L, L), dtype=np.int8)
    cum[:, 1:] = np.cumsum(occ[:, :-1], axis=1) % 2
    cum.flags.writeable = False
    return cum


@dataclass(frozen=True)
class OccIndex:
    """Occupation string of one Fock basis state, bijective with its integer index."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits or any(b not in (0, 1) for b in self.bits):
            raise ValidationError(f"occupation bits must be 0/1, got {self.bits}")

    @property
    def L(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        """Integer index with mu_1 as the most significant bit."""
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value

    @property
    def particle_number(self) -> int:
        return sum(self.bits)

    @classmethod
    def from_index(cls, index: int, L: int) -> "OccIndex":
        if not 0 <= index < 2**L:
            raise ValidationError(f"index {index} out of range for L={L}")
        bits = tuple((index >> (L - 1 - i)) & 1 for i in range(L))
        return cls(bits)

    @classmethod
    def from_orbitals(cls, orbitals, L: int) -> "OccIndex":
        """Index with 1s exactly on the given 1-based orbital set."""
        bits = [0] * L
        for p in orbitals:
            _check_orbital(p, L)
            bits[p - 1] = 1
        return cls(tuple(bits))


def vacuum_index(L: int) -> OccIndex:
    return OccIndex((0,) * L)


@dataclass(frozen=True)
class DenseState:
    """Full coefficient vector over the 2**L Fock basis (ground truth for oracles)."""

    coeffs: np.ndarray
    L: int

    def __post_init__(self):
        _check_dense_cap(self.L)
        arr = np.array(self.coeffs, dtype=np.complex128)
        if arr.shape != (2**self.L,):
            raise ValidationError(
                f"coefficient vector has shape {arr.shape}, expected ({2**self.L},)"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "DenseState":
        n = self.norm()
        if n == 0.0:
            raise ValidationError("cannot normalize the zero state")
        return DenseState(self.coeffs / n, self.L)

    def inner(self, other: "DenseState") -> complex:
        """<self | other> with the physics convention (conjugate-linear left)."""
        if other.L != self.L:
            raise ValidationError("states live on different orbital counts")
        return complex(np.vdot(self.coeffs, other.coeffs))

    def sector_indices(self, N: int) -> np.ndarray:
        return np.nonzero(particle_number_table(self.L) == N)[0]

    def sector(self, N: int) -> np.ndarray:
        """Coefficients of exactly the basis states with particle number N."""
        return self.coeffs[self.sector_indices(N)]

    def sector_weight(self, N: int) -> float:
        return float(np.linalg.norm(self.sector(N)) ** 2)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseState":
        coeffs = np.array([complex(re, im) for re, im in data["coeffs"]])
        return cls(coeffs, int(data["L"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DenseState":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def zero_state(L: int) -> DenseState:
    return DenseState(np.zeros(2**L, dtype=complex), L)


def vacuum_state(L: int) -> DenseState:
    coeffs = np.zeros(2**L, dtype=complex)
    coeffs[0] = 1.0
    return DenseState(coeffs, L)


def basis_state(mu: OccIndex) -> DenseState:
    coeffs = np.zeros(2**mu.L, dtype=complex)
    coeffs[mu.index] = 1.0
    return DenseState(coeffs, mu.L)


def apply_creation(state: DenseState, p: int) -> DenseState:
    """Apply a_p^dagger with the Jordan-Wigner sign convention."""
    L = state.L
    _check_orbital(p, L)
    occ = occupation_table(L)[:, p - 1]
    parity = jw_parity_table(L)[:, p - 1]
    src = np.nonzero(occ == 0)[0]
    out = np.zeros(2**L, dtype=complex)
    signs = 1.0 - 2.0 * parity[src]
    out[src + (1 << (L - p))] = signs * state.coeffs[src]
    return DenseState(out, L)


def apply_annihilation(state: DenseState, p: int) -> DenseState:
    """Apply a_p, the adjoint of ``apply_creation``."""
    L = state.L
    _check_orbital(p, L)
    occ = occupation_table(L)[:, p - 1]
    parity = jw_parity_table(L)[:, p - 1]
    src = np.nonzero(occ == 1)[0]
    out = np.zeros(2**L, dtype=complex)
    signs = 1.0 - 2.0 * parity[src]
    out[src - (1 << (L - p))] = signs * state.coeffs[src]
    return DenseState(out, L)


def apply_orbital_creation(state: DenseState, orbital: np.ndarray) -> DenseState:
    """Apply the creation operator of a general orbital ``sum_p orbital[p-1] a_p^dagger``."""
    orbital = np.asarray(orbital, dtype=complex)
    if orbital.shape != (state.L,):
        raise ValidationError("orbital vector length must equal L")
    out = np.zeros(2**state.L, dtype=complex)
    for p in range(1, state.L + 1):
        if orbital[p - 1] != 0:
            out = out + orbital[p - 1] * apply_creation(state, p).coeffs
    return DenseState(out, state.L)


def slater(orbitals, L: int) -> DenseState:
    """Basis Slater determinant a^+_{i_1} ... a^+_{i_N} |vac> for increasing i_1 < ... < i_N."""
    orbitals = list(orbitals)
    if any(b >= a for a, b in zip(orbitals[1:], orbitals[:-1])) or len(
        set(orbitals)
    ) != len(orbitals):
        raise ValidationError(f"orbital list must be strictly increasing, got {orbitals}")
    return basis_state(OccIndex.from_orbitals(orbitals, L))


def slater_from_orbitals(orbital_matrix: np.ndarray) -> DenseState:
    """Slater determinant of general orthonormal orbitals (columns of the matrix)."""
    phi = np.asarray(orbital_matrix, dtype=complex)
    L, N = phi.shape
    state = vacuum_state(L)
    for m in reversed(range(N)):
        state = apply_orbital_creation(state, phi[:, m])
    return state


def number_expectation(state: DenseState) -> float:
    """<N> of the (not necessarily normalized) state, divided by its norm squared."""
    weights = np.abs(state.coeffs) ** 2
    total = weights.sum()
    if total == 0:
        return 0.0
    return float((particle_number_table(state.L) * weights).sum() / total)


def rdm(state: DenseState) -> np.ndarray:
    """One-particle reduced density matrix, ``gamma[i, j] = <Psi, a^+_{i+1} a_{j+1} Psi>``.

    This orientation makes ``gamma`` transform as ``U.conj().T @ gamma @ U``
    under ``rotate_basis(state, U)``.  Hermitian and positive semidefinite by
    construction (Gram matrix of the vectors ``a_p Psi``).
    """
    if abs(state.norm() - 1.0) > 1e-8:
        warnings.warn(
            f"rdm of a non-normalized state (norm {state.norm():.6g})", stacklevel=2
        )
    L = state.L
    lowered = np.stack([apply_annihilation(state, p).coeffs for p in range(1, L + 1)])
    gamma = lowered.conj() @ lowered.T
    return gamma


# ---------------------------------------------------------------------------
# Sparse second-quantized operator matrices (used by exact diagonalization,
# the CAR test-suite, and basis rotations).
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def creation_matrix(L: int, p: int) -> scipy.sparse.csr_matrix:
    """Sparse 2**L x 2**L matrix of a_p^dagger."""
    _check_orbital(p, L)
    occ = occupation_table(L)[:, p - 1]
    parity = jw_parity_table(L)[:, p - 1]
    src = np.nonzero(occ == 0)[0]
    data = 1.0 - 2.0 * parity[src].astype(float)
    mat = scipy.sparse.csr_matrix(
        (data, (src + (1 << (L - p)), src)), shape=(2**L, 2**L)
    )
    return mat


@lru_cache(maxsize=None)
def annihilation_matrix(L: int, p: int) -> scipy.sparse.csr_matrix:
    return scipy.sparse.csr_matrix(creation_matrix(L, p).conj().T)


@lru_cache(maxsize=None)
def number_matrix(L: int) -> scipy.sparse.csr_matrix:
    """Total number operator, diagonal in the occupation basis."""
    return scipy.sparse.diags(particle_number_table(L).astype(float)).tocsr()


def one_body_terms(L: int, p: int, q: int):
    """Index arrays (src, dst, sign) of ``a_p^dagger a_q`` over the occupation basis."""
    _check_orbital(p, L)
    _check_orbital(q, L)
    occ = occupation_table(L)
    parity = jw_parity_table(L)
    if p == q:
        src = np.nonzero(occ[:, p - 1] == 1)[0]
        return src, src, np.ones(src.size)
    mask = (occ[:, q - 1] == 1) & (occ[:, p - 1] == 0)
    src = np.nonzero(mask)[0]
    # sign = JW parity of q in mu, times JW parity of p after removing q
    par = (parity[src, q - 1] + parity[src, p - 1] + (1 if q < p else 0)) % 2
    dst = src - (1 << (L - q)) + (1 << (L - p))
    return src, dst, 1.0 - 2.0 * par.astype(float)


def one_body_operator(L: int, kappa: np.ndarray) -> scipy.sparse.csr_matrix:
    """Sparse Fock-space matrix of ``sum_pq kappa[p-1, q-1] a_p^dagger a_q``."""
    kappa = np.asarray(kappa, dtype=complex)
    if kappa.shape != (L, L):
        raise ValidationError("one-body coefficient matrix must be L x L")
    rows, cols, vals = [], [], []
    for p in range(1, L + 1):
        for q in range(1, L + 1):
            if kappa[p - 1, q - 1] == 0:
                continue
            src, dst, sign = one_body_terms(L, p, q)
            rows.append(dst)
            cols.append(src)
            vals.append(kappa[p - 1, q - 1] * sign)
    if not rows:
        return scipy.sparse.csr_matrix((2**L, 2**L), dtype=complex)
    mat = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2**L, 2**L),
    )
    return mat


def rotate_basis(state: DenseState, U: np.ndarray) -> DenseState:
    """Rotate a Fock-space state by the number-conserving orbital rotation U.

    The rotation is generated by the one-body operator ``exp(K_hat)`` with
    ``K_hat = sum_pq log(U.T)[p, q] a_p^dagger a_q``, so two-particle
    coefficient matrices transform as ``c -> U.T @ c @ U`` (checked against a
    direct matrix congruence in the tests) and norms are preserved.
    """
    U = np.asarray(U, dtype=complex)
    L = state.L
    if U.shape != (L, L):
        raise ValidationError(f"rotation must be {L} x {L}, got {U.shape}")
    defect = np.max(np.abs(U.conj().T @ U - np.eye(L)))
    if defect > UNITARY_TOL:
        raise ValidationError(f"rotation is not unitary (defect {defect:.3e})")
    logU = scipy.linalg.logm(U)
    logU = (logU - logU.conj().T) / 2.0  # project onto skew-Hermitian generators
    generator = one_body_operator(L, logU.T)
    rotated = scipy.sparse.linalg.expm_multiply(generator, state.coeffs)
    return DenseState(rotated, L)
