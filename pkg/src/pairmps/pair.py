"""Constructive low-rank representation of two-fermion states.

A two-particle state is stored through its antisymmetric coefficient matrix
``c`` (entries ``c[i, j]`` multiply the basis determinant occupying orbitals
``i+1 < j+1``).  ``normal_form`` block-diagonalizes ``c`` by a unitary
congruence ``U.T @ c @ U`` into 2x2 blocks ``[[0, l], [-l, 0]]`` with
``l_1 >= l_2 >= ... >= 0``; the columns of the inverse rotation ``U.conj()``
are the natural-orbital pairs.  In that basis the state is a sum of disjoint
pair determinants and admits an explicit MPS whose bond dimensions are
``(2, 2, 3, 2, ..., 2, 3, 2, 2)``, built here site by site and also as
pair-site tensors.  A half-infinite variant with chain-length-independent
cores covers square-summable pair amplitude sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fock import DenseState, OccIndex, ValidationError, slater
from .mps import Mps

ANTISYM_TOL = 1e-12

#: Relative threshold below which pair amplitudes are truncated to zero.
PAIR_TRUNCATION_TOL = 1e-12


@dataclass(frozen=True)
class AntisymmetricMatrix:
    """L x L antisymmetric coefficient matrix; only the strict upper triangle is free."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = np.array(self.matrix, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"coefficient matrix must be square, got {arr.shape}")
        scale = max(1.0, float(np.max(np.abs(arr))) if arr.size else 1.0)
        defect = float(np.max(np.abs(arr + arr.T))) if arr.size else 0.0
        if defect > ANTISYM_TOL * scale:
            raise ValidationError(f"matrix is not antisymmetric (defect {defect:.3e})")
        upper = np.triu(arr, k=1)
        arr = upper - upper.T  # exact antisymmetry, zero diagonal
        arr.flags.writeable = False
        object.__setattr__(self, "matrix", arr)

    @property
    def L(self) -> int:
        return self.matrix.shape[0]

    def state_norm(self) -> float:
        """Norm of the embedded two-particle state, sqrt(sum_{i<j} |c_ij|^2)."""
        return float(np.linalg.norm(self.matrix) / np.sqrt(2.0))

    def to_state(self) -> DenseState:
        """Embed into the two-particle sector of the dense Fock basis."""
        L = self.L
        coeffs = np.zeros(2**L, dtype=complex)
        for i in range(1, L + 1):
            for j in range(i + 1, L + 1):
                idx = OccIndex.from_orbitals((i, j), L).index
                coeffs[idx] = self.matrix[i - 1, j - 1]
        return DenseState(coeffs, L)

    @classmethod
    def from_state(cls, state: DenseState, tol: float = 1e-12) -> "AntisymmetricMatrix":
        """Extract the coefficient matrix of a state in the two-particle sector."""
        from .fock import particle_number_table

        L = state.L
        norm = state.norm()
        outside = float(
            np.linalg.norm(state.coeffs[particle_number_table(L) != 2])
        )
        if outside > tol * max(norm, 1.0):
            raise ValidationError(
                f"state has weight {outside:.3e} outside the two-particle sector"
            )
        c = np.zeros((L, L), dtype=complex)
        for i in range(1, L + 1):
            for j in range(i + 1, L + 1):
                idx = OccIndex.from_orbitals((i, j), L).index
                c[i - 1, j - 1] = state.coeffs[idx]
        return cls(c - c.T)


@dataclass(frozen=True)
class PairNormalForm:
    """Unitary U and amplitudes with ``U.T @ c @ U`` in canonical pair-block form."""

    U: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        U = np.array(self.U, dtype=np.complex128)
        lam = np.array(self.lambdas, dtype=float)
        U.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "lambdas", lam)

    @property
    def L(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return len(self.lambdas)

    def block_matrix(self) -> np.ndarray:
        """The canonical antisymmetric matrix with the stored amplitudes."""
        return canonical_pair_matrix(self.lambdas, self.L)

    def to_dict(self) -> dict:
        return {
            "U": [[[float(z.real), float(z.imag)] for z in row] for row in self.U],
            "lambdas": [float(l) for l in self.lambdas],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


@dataclass(frozen=True)
class PairedState:
    """Sum of disjoint pair determinants: sum_l lambdas[l] |phi_{2l-1} phi_{2l}>."""

    lambdas: tuple
    L: int

    def __post_init__(self):
        lam = tuple(float(l) for l in self.lambdas)
        if 2 * len(lam) > self.L:
            raise ValidationError(
                f"{len(lam)} pairs do not fit into {self.L} orbitals"
            )
        if self.L < 2:
            raise ValidationError("a paired state needs at least two orbitals")
        object.__setattr__(self, "lambdas", lam)

    @property
    def k(self) -> int:
        return len(self.lambdas)

    def to_dense(self) -> DenseState:
        """Direct sum of basis Slater determinants (independent of any MPS path)."""
        coeffs = np.zeros(2**self.L, dtype=complex)
        for ell, lam in enumerate(self.lambdas, start=1):
            coeffs = coeffs + lam * slater((2 * ell - 1, 2 * ell), self.L).coeffs
        return DenseState(coeffs, self.L)


def canonical_pair_matrix(lambdas, L: int) -> np.ndarray:
    """Antisymmetric matrix with blocks [[0, l], [-l, 0]] on the diagonal."""
    block = np.zeros((L, L), dtype=complex)
    for ell, lam in enumerate(lambdas):
        block[2 * ell, 2 * ell + 1] = lam
        block[2 * ell + 1, 2 * ell] = -lam
    return block


def _su2_gauge_toward_identity(pair_columns: np.ndarray, rows: slice) -> np.ndarray:
    """Determinant-one unitary g making ``pair_columns @ g`` close to coordinate axes.

    The allowed gauge inside one pair block is SU(2) (it preserves the
    canonical 2x2 form).  The phase correction lands on the second column.
    """
    m = pair_columns[rows, :]
    u, _, vh = np.linalg.svd(m)
    g = (u @ vh).conj().T
    det = np.linalg.det(g)
    if det != 0:
        g = g @ np.diag([1.0, np.conj(det) / abs(det)])
    return g


def normal_form(c: AntisymmetricMatrix, tol: float = PAIR_TRUNCATION_TOL) -> PairNormalForm:
    """Canonical pair form of an antisymmetric matrix under unitary congruence.

    Diagonalizes the Hermitian PSD matrix ``c^+ c`` (eigenvalues are squared
    pair amplitudes, each at least doubly degenerate) and pairs basis vectors
    of every eigenspace through the antiunitary partner map
    ``w -> conj(c @ w) / l``, which squares to -1 there.  Amplitudes come out
    nonnegative and descending; pairs with ``l <= tol * l_max`` are dropped.
    """
    mat = c.matrix
    L = c.L
    if L < 2:
        raise ValidationError("normal form needs L >= 2")
    # Right-singular vectors of c span the eigenspaces of c^+ c; working from
    # the SVD of c keeps small amplitudes at linear (not squared) accuracy.
    _, sv, vh = np.linalg.svd(mat)
    basis_all = vh.conj().T
    sv_max = sv[0] if sv.size else 0.0

    # Singular values of an antisymmetric matrix come in equal pairs, so
    # consecutive descending entries (0,1), (2,3), ... belong together;
    # truncation decisions are made per pair, never splitting one.
    cluster_tol = max(1e-8 * max(sv_max, 1e-300), 1e-14)
    merged = []
    for pos in range(0, 2 * (L // 2), 2):
        lam = float(sv[pos : pos + 2].mean())
        if sv_max == 0.0 or lam <= tol * sv_max:
            break
        if merged and abs(float(sv[merged[-1][0]]) - lam) <= cluster_tol:
            merged[-1].extend([pos, pos + 1])
        else:
            merged.append([pos, pos + 1])

    columns = []
    lambdas = []
    for cluster in merged:
        basis = basis_all[:, cluster]
        lam = float(np.mean(sv[cluster]))
        remaining = basis
        while remaining.shape[1] > 0:
            w = remaining[:, 0]
            w = w / np.linalg.norm(w)
            partner = -np.conj(mat @ w) / lam
            # keep the partner inside the singular subspace and orthogonal to
            # w (it is both up to floating-point noise of order eps/lam)
            partner = remaining @ (remaining.conj().T @ partner)
            partner = partner - w * (w.conj() @ partner)
            pnorm = np.linalg.norm(partner)
            if pnorm < 0.5:
                raise ValidationError(
                    "partner construction degenerated; amplitudes too close to "
                    "the working precision"
                )
            partner = partner / pnorm
            pair = np.stack([w, partner], axis=1)
            if remaining.shape[1] > 2:
                proj = remaining - pair @ (pair.conj().T @ remaining)
                u, s, _ = np.linalg.svd(proj, full_matrices=False)
                remaining = u[:, : remaining.shape[1] - 2]
            else:
                remaining = remaining[:, :0]
            columns.append(pair)
            lambdas.append(lam)

    n_pairs = len(lambdas)
    U = np.zeros((L, L), dtype=complex)
    for ell, pair in enumerate(columns):
        # Gauge-fix each pair toward the coordinate axes it should occupy, so a
        # matrix already in canonical form maps to U = identity.
        rows = slice(2 * ell, 2 * ell + 2)
        g = _su2_gauge_toward_identity(pair, rows)
        U[:, rows] = pair @ g
    if 2 * n_pairs < L:
        # Kernel vectors fill the unpaired columns.
        occupied = U[:, : 2 * n_pairs]
        proj = np.eye(L) - occupied @ occupied.conj().T
        u, s, _ = np.linalg.svd(proj)
        U[:, 2 * n_pairs :] = u[:, : L - 2 * n_pairs]
    return PairNormalForm(U, np.array(lambdas))


def triangular_chain_product(a, b) -> np.ndarray:
    """Closed-form product of the 2x2 upper-triangular factors [[a_i, b_i], [0, a_i]].

    Equals ``[[prod a, sum_i b_i prod_{j != i} a_j], [0, prod a]]``; the empty
    product is the identity.  Prefix/suffix products keep the off-diagonal sum
    well defined when some ``a_i`` vanish.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("need two equal-length 1-d sequences")
    m = a.size
    diag = np.prod(a) if m else 1.0 + 0j
    prefix = np.concatenate([[1.0 + 0j], np.cumprod(a)])
    suffix = np.concatenate([np.cumprod(a[::-1])[::-1], [1.0 + 0j]])
    off = complex(np.sum(b * prefix[:-1] * suffix[1:]))
    return np.array([[diag, off], [0.0, diag]], dtype=complex)


def _delta_cores(lam_first: float):
    """Pair-site boundary row (1, 4, 2): (delta_00, lam * delta_11)."""
    core = np.zeros((1, 4, 2), dtype=complex)
    core[0, 0, 0] = 1.0  # both bits empty
    core[0, 3, 1] = lam_first  # both bits occupied
    return core


def build_pair_mps(p: PairedState) -> Mps:
    """Pair-site MPS (physical dimension 4) with bond dimensions (1, 2, ..., 2, 1).

    The interior tensors are the 2x2 upper-triangular factors of
    :func:`triangular_chain_product` with ``a = delta_00`` and
    ``b = lambda * delta_11`` evaluated per pair index.
    """
    k = p.k
    if k < 2:
        raise ValidationError("pair-site chain needs k >= 2 (k = 1 is a single determinant)")
    if p.L != 2 * k:
        raise ValidationError("pair-site chain covers exactly 2k orbitals")
    cores = [_delta_cores(p.lambdas[0])]
    for lam in p.lambdas[1:-1]:
        core = np.zeros((2, 4, 2), dtype=complex)
        core[0, 0, 0] = 1.0
        core[1, 0, 1] = 1.0
        core[0, 3, 1] = lam
        cores.append(core)
    last = np.zeros((2, 4, 1), dtype=complex)
    last[0, 3, 0] = p.lambdas[-1]
    last[1, 0, 0] = 1.0
    cores.append(last)
    return Mps(tuple(cores))


def _site_cores(lambdas, n_pairs: int) -> list:
    """Single-site cores of the pair construction for the first ``n_pairs`` pairs."""
    lam = list(lambdas)
    k = n_pairs
    cores = []
    # first pair: 1x2 row, then 2x2 diagonal carrying lambda_1
    a1 = np.zeros((1, 2, 2), dtype=complex)
    a1[0, 0, 0] = 1.0
    a1[0, 1, 1] = 1.0
    cores.append(a1)
    a2 = np.zeros((2, 2, 2), dtype=complex)
    a2[0, 0, 0] = 1.0
    a2[1, 1, 1] = lam[0]
    cores.append(a2)
    for ell in range(2, k):  # interior pairs 1 < ell < k
        odd = np.zeros((2, 2, 3), dtype=complex)
        odd[0, 0, 0] = 1.0
        odd[0, 1, 1] = lam[ell - 1]
        odd[1, 0, 2] = 1.0
        cores.append(odd)
        even = np.zeros((3, 2, 2), dtype=complex)
        even[0, 0, 0] = 1.0
        even[1, 1, 1] = 1.0
        even[2, 0, 1] = 1.0
        cores.append(even)
    # terminal pair
    odd_last = np.zeros((2, 2, 2), dtype=complex)
    odd_last[0, 1, 0] = lam[k - 1]
    odd_last[1, 0, 1] = 1.0
    cores.append(odd_last)
    even_last = np.zeros((2, 2, 1), dtype=complex)
    even_last[0, 1, 0] = 1.0
    even_last[1, 0, 0] = 1.0
    cores.append(even_last)
    return cores


def _empty_site_core() -> np.ndarray:
    core = np.zeros((1, 2, 1), dtype=complex)
    core[0, 0, 0] = 1.0
    return core


def build_explicit_mps(p: PairedState) -> Mps:
    """Single-site MPS of a paired state with the minimal bond-dimension profile.

    For ``L = 2k >= 6`` the interior bond dimensions are
    ``(2, 2, 3, 2, ..., 2, 3, 2, 2)``; ``L = 4`` reduces to ``(2, 2, 2)`` and
    ``L = 2`` to a product of two scalars.  Orbitals beyond the last pair get
    trivial empty-site cores.
    """
    k = p.k
    L = p.L
    if k == 0:
        return Mps(tuple(_empty_site_core() * 0.0 for _ in range(L)))
    if k == 1:
        first = np.zeros((1, 2, 1), dtype=complex)
        first[0, 1, 0] = p.lambdas[0]
        second = np.zeros((1, 2, 1), dtype=complex)
        second[0, 1, 0] = 1.0
        cores = [first, second]
    else:
        cores = _site_cores(p.lambdas, k)
    cores.extend(_empty_site_core() for _ in range(L - 2 * k))
    return Mps(tuple(cores))


def build_bd3_from_dense(state: DenseState, tol: float = PAIR_TRUNCATION_TOL):
    """Rotate a two-particle state into its pair basis and build the explicit MPS.

    Returns ``(mps, form)`` where ``form.U`` satisfies
    ``rotate_basis(state, form.U) == to_dense(mps)`` and conversely
    ``rotate_basis(to_dense(mps), form.U.conj().T)`` reproduces the input.
    """
    c = AntisymmetricMatrix.from_state(state)
    form = normal_form(c, tol=tol)
    paired = PairedState(tuple(form.lambdas), state.L)
    return build_explicit_mps(paired), form


# ---------------------------------------------------------------------------
# Half-infinite chain: cores independent of the truncation length.
# ---------------------------------------------------------------------------


def tail_site_core(i: int, lambdas) -> np.ndarray:
    """Universal core at 1-based site ``i`` of the half-infinite pair chain.

    Only the amplitudes up to pair ``ceil(i / 2)`` enter, so the core does not
    depend on where the chain is later truncated.
    """
    lam = list(lambdas)
    ell = (i + 1) // 2
    if ell > len(lam):
        raise ValidationError(f"site {i} needs pair amplitude {ell}, got {len(lam)}")
    if i == 1:
        core = np.zeros((1, 2, 2), dtype=complex)
        core[0, 0, 0] = 1.0
        core[0, 1, 1] = 1.0
        return core
    if i == 2:
        core = np.zeros((2, 2, 2), dtype=complex)
        core[0, 0, 0] = 1.0
        core[1, 1, 1] = lam[0]
        return core
    if i % 2 == 1:
        core = np.zeros((2, 2, 3), dtype=complex)
        core[0, 0, 0] = 1.0
        core[0, 1, 1] = lam[ell - 1]
        core[1, 0, 2] = 1.0
        return core
    core = np.zeros((3, 2, 2), dtype=complex)
    core[0, 0, 0] = 1.0
    core[1, 1, 1] = 1.0
    core[2, 0, 1] = 1.0
    return core


def tail_boundary_vector(r: int) -> np.ndarray:
    """Open-boundary contraction vector (0, ..., 0, 1) of length r."""
    vec = np.zeros(r, dtype=complex)
    vec[-1] = 1.0
    return vec


def build_tail_cores(lambdas, L: int) -> Mps:
    """Length-L truncation of the half-infinite chain (L even).

    All cores but the last are the universal :func:`tail_site_core` tensors;
    the final core is the universal core contracted against ``(0, ..., 0, 1)``,
    so the dense expansion is the partial sum over the first ``L/2`` pairs.
    """
    if L % 2 != 0:
        raise ValidationError(f"truncation length must be even, got L={L}")
    if L < 2:
        raise ValidationError("need L >= 2")
    lam = list(lambdas)
    if 2 * len(lam) < L:
        raise ValidationError(f"need at least {L // 2} pair amplitudes, got {len(lam)}")
    cores = [tail_site_core(i, lam) for i in range(1, L)]
    last_full = tail_site_core(L, lam)
    contracted = last_full @ tail_boundary_vector(last_full.shape[2])
    cores.append(contracted[:, :, None])
    return Mps(tuple(cores))


def pair_bond_profile(L: int) -> tuple:
    """Minimal interior bond dimensions of the explicit pair MPS for even L."""
    if L < 2 or L % 2 != 0:
        raise ValidationError(f"profile defined for even L >= 2, got {L}")
    if L == 2:
        return (1,)
    return tuple([2] + [2, 3] * ((L - 4) // 2) + [2, 2])


def random_two_particle_state(L: int, rng) -> DenseState:
    """Normalized Gaussian two-particle state (complex antisymmetric coefficients)."""
    if L < 2:
        raise ValidationError("need L >= 2")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    raw = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    c = np.triu(raw, k=1)
    c = c - c.T
    c = c / (np.linalg.norm(c) / np.sqrt(2.0))
    return AntisymmetricMatrix(c).to_state()
