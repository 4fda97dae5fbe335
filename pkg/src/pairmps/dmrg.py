"""Desk-scale quantum-chemistry DMRG with fermionic mode optimization.

The solver works with the full 2**L Fock space: the effective single-site
problem is ``P^+ (H + mu (N_hat - N)^2) P`` where ``P`` embeds the local
tensor through the dense prefix/suffix contractions of the other cores.  At
the orbital counts treated here (L <= 12) this eliminates MPO environments
entirely.  Particle number is enforced by the quadratic penalty; excited
states by shifted projectors onto converged lower states plus an exact local
orthogonality projection.

Mode optimization runs an outer loop over orbital rotations: for bond
dimensions that admit the paired profile the rotation is the natural-orbital
pairing transform of the current solution, for bond dimension one it is the
diagonalizer of the closed-shell Fock matrix (the classic self-consistent
field step, to which the method reduces).  Integrals transform as
``h -> U.T @ h @ U.conj()`` and the matching four-index congruence, so a
state rotated with :func:`pairmps.fock.rotate_basis` keeps its energy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .fock import (
    DenseState,
    ValidationError,
    occupation_table,
    one_body_operator,
    jw_parity_table,
    particle_number_table,
    rotate_basis,
)
from .mps import Mps, from_dense, to_dense
from .pair import (
    AntisymmetricMatrix,
    PairedState,
    build_explicit_mps,
    normal_form,
    pair_bond_profile,
)

DENSE_MATRIX_CAP = 12

SYMMETRY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Hamiltonian assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoBodyHamiltonian:
    """One- and two-electron integrals defining H on Fock space.

    ``v[p, q, r, s]`` multiplies ``a^+_p a^+_q a_s a_r / 2`` (physicist
    convention <pq|rs>); Hermiticity demands ``v_pqrs = conj(v_rspq)`` and the
    electron-exchange symmetry ``v_pqrs = v_qpsr``, both verified on load.
    """

    h: np.ndarray
    v: np.ndarray
    L: int
    core_energy: float = 0.0

    def __post_init__(self):
        h = np.array(self.h, dtype=np.complex128)
        v = np.array(self.v, dtype=np.complex128)
        L = self.L
        if h.shape != (L, L):
            raise ValidationError(f"h must be {L} x {L}, got {h.shape}")
        if v.shape != (L, L, L, L):
            raise ValidationError(f"v must be {L}^4, got {v.shape}")
        scale_h = max(1.0, float(np.max(np.abs(h))))
        if np.max(np.abs(h - h.conj().T)) > SYMMETRY_TOL * scale_h:
            raise ValidationError("one-electron integrals are not Hermitian")
        scale_v = max(1.0, float(np.max(np.abs(v))))
        if np.max(np.abs(v - v.transpose(1, 0, 3, 2))) > SYMMETRY_TOL * scale_v:
            raise ValidationError("two-electron integrals violate exchange symmetry")
        if np.max(np.abs(v - np.conj(v.transpose(2, 3, 0, 1)))) > SYMMETRY_TOL * scale_v:
            raise ValidationError("two-electron integrals violate Hermiticity")
        h.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)


def _two_body_operator(L: int, v: np.ndarray) -> scipy.sparse.csr_matrix:
    """Sparse matrix of ``(1/2) sum_pqrs v_pqrs a^+_p a^+_q a_s a_r``."""
    occ = occupation_table(L)
    par = jw_parity_table(L)
    dim = 2**L
    rows, cols, vals = [], [], []
    base = np.arange(dim)
    for r in range(1, L + 1):
        bit_r = 1 << (L - r)
        has_r = occ[:, r - 1] == 1
        for s in range(1, L + 1):
            if s == r:
                continue
            bit_s = 1 << (L - s)
            mask_rs = has_r & (occ[:, s - 1] == 1)
            src0 = base[mask_rs]
            if src0.size == 0:
                continue
            sign0 = 1.0 - 2.0 * par[src0, r - 1]
            mid1 = src0 - bit_r
            sign1 = sign0 * (1.0 - 2.0 * par[mid1, s - 1])
            mid2 = mid1 - bit_s
            for q in range(1, L + 1):
                bit_q = 1 << (L - q)
                empty_q = (mid2 & bit_q) == 0
                src1 = src0[empty_q]
                if src1.size == 0:
                    continue
                m2 = mid2[empty_q]
                sign2 = sign1[empty_q] * (1.0 - 2.0 * par[m2, q - 1])
                mid3 = m2 + bit_q
                for p in range(1, L + 1):
                    if p == q:
                        continue
                    coeff = v[p - 1, q - 1, r - 1, s - 1]
                    if coeff == 0:
                        continue
                    bit_p = 1 << (L - p)
                    empty_p = (mid3 & bit_p) == 0
                    if not np.any(empty_p):
                        continue
                    src = src1[empty_p]
                    m3 = mid3[empty_p]
                    sign3 = sign2[empty_p] * (1.0 - 2.0 * par[m3, p - 1])
                    rows.append(m3 + bit_p)
                    cols.append(src)
                    vals.append(0.5 * coeff * sign3)
    if not rows:
        return scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    mat = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    return mat


def assemble_sparse(
    h: np.ndarray, v: np.ndarray, core_energy: float = 0.0
) -> scipy.sparse.csr_matrix:
    """Sparse Fock-space Hamiltonian from validated integrals."""
    L = int(np.asarray(h).shape[0])
    ham = TwoBodyHamiltonian(h, v, L, core_energy)
    mat = one_body_operator(L, ham.h) + _two_body_operator(L, ham.v)
    if core_energy != 0.0:
        mat = mat + core_energy * scipy.sparse.identity(2**L, format="csr")
    return mat.tocsr()


def assemble_dense(h: np.ndarray, v: np.ndarray, core_energy: float = 0.0) -> np.ndarray:
    """Dense Fock-space Hamiltonian; commutes with the number operator."""
    L = int(np.asarray(h).shape[0])
    if L > DENSE_MATRIX_CAP:
        raise ValidationError(
            f"dense Hamiltonian assembly capped at L={DENSE_MATRIX_CAP}"
        )
    return assemble_sparse(h, v, core_energy).toarray()


def parent_hamiltonian(state: DenseState) -> np.ndarray:
    """Minus the orthogonal projector onto a normalized state."""
    psi = state.normalized().coeffs
    return -np.outer(psi, psi.conj())


def fci_levels(H, N: int, count: int) -> np.ndarray:
    """Lowest eigenvalues of H restricted to the N-particle sector, ascending."""
    dim = H.shape[0]
    L = int(np.log2(dim))
    idx = np.nonzero(particle_number_table(L) == N)[0]
    if count > idx.size:
        raise ValidationError(
            f"requested {count} levels but the N={N} sector has dimension {idx.size}"
        )
    sub = H[np.ix_(idx, idx)] if isinstance(H, np.ndarray) else H[idx][:, idx].toarray()
    return np.linalg.eigvalsh(sub)[:count]


def random_two_body(L: int, seed: int, scale: float = 1.0):
    """Random Hermitian-symmetrized integrals (h, v) with the pinned symmetries."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    h = scale * (a + a.conj().T) / 2.0
    t = rng.standard_normal((L,) * 4) + 1j * rng.standard_normal((L,) * 4)
    exch = t.transpose(1, 0, 3, 2)
    herm = np.conj(t.transpose(2, 3, 0, 1))
    both = np.conj(exch.transpose(2, 3, 0, 1))
    v = scale * (t + exch + herm + both) / 4.0
    return h, v


def rotate_integrals(h: np.ndarray, v: np.ndarray, U: np.ndarray):
    """Transform integrals so rotated states keep their energy.

    Matches the convention of :func:`pairmps.fock.rotate_basis`: creation
    indices contract with ``U``, annihilation indices with ``U.conj()``.
    """
    h_new = np.einsum("pq,pk,ql->kl", h, U, U.conj())
    v_new = np.einsum("pqrs,pk,ql,rn,sm->klnm", v, U, U, U.conj(), U.conj(), optimize=True)
    return h_new, v_new


# ---------------------------------------------------------------------------
# Solver configuration and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DmrgConfig:
    """Tunable knobs of the sweep and mode-optimization loops."""

    energy_tol: float = 1e-10
    max_sweeps: int = 60
    penalty_weight: float | None = None  # default: 10x the spectral-range estimate
    rot_tol: float = 1e-8
    max_outer: int = 30
    n_starts: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "energy_tol": self.energy_tol,
            "max_sweeps": self.max_sweeps,
            "penalty_weight": self.penalty_weight,
            "rot_tol": self.rot_tol,
            "max_outer": self.max_outer,
            "n_starts": self.n_starts,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DmrgConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "DmrgConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SweepDiagnostics:
    sweeps: int
    converged: bool
    penalized_energy: float
    leakage: float
    energy_trace: tuple

    def to_dict(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "converged": self.converged,
            "penalized_energy": self.penalized_energy,
            "leakage": self.leakage,
            "energy_trace": list(self.energy_trace),
        }


@dataclass(frozen=True)
class LevelResult:
    index: int
    energy: float
    fci_energy: float | None
    sweeps: int
    outer_iterations: int
    residual: float
    leakage: float
    converged: bool

    def to_dict(self) -> dict:
        return {
            "level": self.index,
            "energy": self.energy,
            "fci_energy": self.fci_energy,
            "sweeps": self.sweeps,
            "outer_iterations": self.outer_iterations,
            "residual": self.residual,
            "leakage": self.leakage,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class EnergyReport:
    """Per-level energies of one solver run next to the dense reference values."""

    method: str
    L: int
    N: int
    bond_dims: tuple
    levels: tuple
    seed: int
    config: dict = field(default_factory=dict)
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "L": self.L,
            "N": self.N,
            "bond_dims": list(self.bond_dims),
            "levels": [lvl.to_dict() for lvl in self.levels],
            "seed": self.seed,
            "config": self.config,
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        rows = [
            f"method: {self.method}   L={self.L}  N={self.N}  "
            f"bond_dims={list(self.bond_dims)}  seed={self.seed}"
        ]
        header = (
            f"{'level':>5} {'E_method':>22} {'E_FCI':>22} {'|diff|':>10} "
            f"{'sweeps':>6} {'outer':>5} {'residual':>10} {'leakage':>10} {'conv':>5}"
        )
        rows.append(header)
        rows.append("-" * len(header))
        for lvl in self.levels:
            fci = lvl.fci_energy
            diff = abs(lvl.energy - fci) if fci is not None else float("nan")
            rows.append(
                f"{lvl.index:>5} {lvl.energy:>22.14f} "
                f"{(fci if fci is not None else float('nan')):>22.14f} "
                f"{diff:>10.2e} {lvl.sweeps:>6} {lvl.outer_iterations:>5} "
                f"{lvl.residual:>10.2e} {lvl.leakage:>10.2e} "
                f"{str(lvl.converged):>5}"
            )
        for note in self.notes:
            rows.append(f"note: {note}")
        return "\n".join(rows)

    def all_converged(self) -> bool:
        return all(lvl.converged for lvl in self.levels)


# ---------------------------------------------------------------------------
# Single-site sweep solver with dense embeddings
# ---------------------------------------------------------------------------


def clip_bond_dims(bond_dims, L: int) -> tuple:
    """Clamp a requested chain to the representable maximum min(2^k, 2^(L-k))."""
    dims = list(bond_dims)
    if len(dims) != L - 1:
        raise ValidationError(f"need {L - 1} interior bond dimensions, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ValidationError("bond dimensions must be >= 1")
    return tuple(
        int(min(d, 2 ** (k + 1), 2 ** (L - k - 1))) for k, d in enumerate(dims)
    )


def uniform_bond_dims(r: int, L: int) -> tuple:
    return clip_bond_dims([r] * (L - 1), L)


def _spectral_range_estimate(H) -> float:
    """Gershgorin bound on the spectral range of a Hermitian operator."""
    if isinstance(H, np.ndarray):
        absrow = np.sum(np.abs(H), axis=1)
        diag = np.real(np.diag(H))
    else:
        absrow = np.asarray(np.abs(H).sum(axis=1)).ravel()
        diag = np.real(H.diagonal())
    radius = absrow - np.abs(diag)
    upper = np.max(diag + radius)
    lower = np.min(diag - radius)
    return float(max(upper - lower, 1e-8))


def _pad_cores(mps: Mps, dims, rng, noise: float = 1e-8) -> list:
    """Embed the cores of an MPS into a (possibly larger) fixed-dimension chain."""
    L = mps.n_sites
    target = [1, *dims, 1]
    cores = []
    for i, core in enumerate(mps.cores):
        r_l, d, r_r = core.shape
        t_l, t_r = target[i], target[i + 1]
        if r_l > t_l or r_r > t_r:
            raise ValidationError("initial MPS exceeds the requested bond dimensions")
        out = noise * (
            rng.standard_normal((t_l, d, t_r)) + 1j * rng.standard_normal((t_l, d, t_r))
        )
        out[:r_l, :, :r_r] = core
        cores.append(out)
    return cores


def _initial_cores(L, dims, N, H, rng, initial: Mps | None) -> list:
    if initial is not None:
        return _pad_cores(initial, dims, rng)
    if N == 2 and L % 2 == 0 and all(
        d >= p for d, p in zip(dims, pair_bond_profile(L))
    ):
        lam = np.sort(rng.random(L // 2))[::-1] + 0.1
        lam = lam / np.linalg.norm(lam)
        warm = build_explicit_mps(PairedState(tuple(lam), L))
        return _pad_cores(warm, dims, rng, noise=1e-3)
    # fall back to the best diagonal determinant plus noise
    diag = np.real(H.diagonal()) if not isinstance(H, np.ndarray) else np.real(np.diag(H))
    sector = np.nonzero(particle_number_table(L) == N)[0]
    best = sector[np.argmin(diag[sector])]
    bits = [(best >> (L - 1 - i)) & 1 for i in range(L)]
    cores = []
    for b in bits:
        core = np.zeros((1, 2, 1), dtype=complex)
        core[0, b, 0] = 1.0
        cores.append(core)
    return _pad_cores(Mps(tuple(cores)), dims, rng, noise=1e-3)


def _right_canonicalize_inplace(cores: list) -> None:
    for i in range(len(cores) - 1, 0, -1):
        r_l, d, r_r = cores[i].shape
        mat = cores[i].reshape(r_l, d * r_r)
        q, _ = np.linalg.qr(mat.conj().T)
        q = q[:, :r_l]
        cores[i] = q.conj().T.reshape(r_l, d, r_r)
        transfer = mat @ q
        cores[i - 1] = np.tensordot(cores[i - 1], transfer, axes=(2, 0))


def _suffixes(cores: list) -> list:
    """suffix[i]: (r_i, 2^(L-1-i)) contraction of cores i+1..L-1."""
    L = len(cores)
    suf = [None] * L
    current = np.ones((1, 1), dtype=complex)
    suf[L - 1] = current
    for i in range(L - 1, 0, -1):
        core = cores[i]
        block = np.tensordot(core, current, axes=(2, 0))  # (r_l, d, cols)
        current = block.reshape(core.shape[0], -1)
        suf[i - 1] = current
    return suf


def _local_solve(Hp, prefix, suffix, shape, sigma, ortho_vectors):
    """Exact minimizer of the penalized quadratic form on one embedded site."""
    r_l, d, r_r = shape
    m = r_l * d * r_r
    # embedding matrix P: column (a, t, b) -> prefix[:, a] (x) e_t (x) suffix[b, :]
    P = np.einsum("xa,st,by->xsyatb", prefix, np.eye(d), suffix).reshape(
        prefix.shape[0] * d * suffix.shape[1], m
    )
    M = P.conj().T @ (Hp @ P)
    M = (M + M.conj().T) / 2.0
    n_constraints = 0
    constraint_basis = None
    if ortho_vectors:
        qs = np.stack([P.conj().T @ vec for vec in ortho_vectors], axis=1)
        for k in range(qs.shape[1]):
            M = M + sigma * np.outer(qs[:, k], qs[:, k].conj())
        # exact orthogonality on the well-determined constraint directions;
        # presences below the cutoff are left to the sigma shift (their
        # reachable overlap is bounded by the cutoff anyway)
        uq, sq, _ = np.linalg.svd(qs, full_matrices=False)
        n_constraints = int(np.count_nonzero(sq > 1e-8))
        if n_constraints >= m:
            return None, None
        if n_constraints:
            constraint_basis = uq[:, :n_constraints]
    if constraint_basis is not None:
        proj = np.eye(m) - constraint_basis @ constraint_basis.conj().T
        u, s, _ = np.linalg.svd(proj)
        basis = u[:, : m - n_constraints]
        Mc = basis.conj().T @ M @ basis
        Mc = (Mc + Mc.conj().T) / 2.0
        evals, evecs = np.linalg.eigh(Mc)
        x = basis @ evecs[:, 0]
    else:
        evals, evecs = np.linalg.eigh(M)
        x = evecs[:, 0]
    return float(evals[0]), x.reshape(shape)


def dmrg_minimize(
    H,
    bond_dims,
    N: int,
    config: DmrgConfig | None = None,
    *,
    initial: Mps | None = None,
    orthogonal_to=(),
    rng=None,
):
    """Fixed-bond-dimension single-site DMRG in the N-particle sector.

    Alternating sweeps solve the exact local eigenproblem of the penalized
    operator ``H + mu (N_hat - N)^2`` (plus shifted projectors onto the
    ``orthogonal_to`` states), so the tracked energy never increases within a
    sweep.  Returns ``(mps, energy, diagnostics)`` with the penalty-free
    Rayleigh quotient of the converged state; non-convergence is flagged in
    the diagnostics, not raised.
    """
    config = config or DmrgConfig()
    dim = H.shape[0]
    L = int(np.log2(dim))
    dims = clip_bond_dims(bond_dims, L)
    rng = np.random.default_rng(config.seed) if rng is None else rng

    spectral_range = _spectral_range_estimate(H)
    mu = config.penalty_weight if config.penalty_weight is not None else 10.0 * spectral_range
    sigma = spectral_range + 1.0
    nvec = particle_number_table(L).astype(float)
    penalty = scipy.sparse.diags(mu * (nvec - N) ** 2)
    Hp = (scipy.sparse.csr_matrix(H) if isinstance(H, np.ndarray) else H.tocsr()) + penalty

    ortho = [np.asarray(s.coeffs if isinstance(s, DenseState) else s) for s in orthogonal_to]

    cores = _initial_cores(L, dims, N, H, rng, initial)
    _right_canonicalize_inplace(cores)
    norm0 = np.linalg.norm(cores[0])
    if norm0 > 0:
        cores[0] = cores[0] / norm0

    trace = []
    energy = np.inf
    converged = False
    sweeps_done = 0
    for sweep in range(config.max_sweeps):
        previous = energy
        suffixes = _suffixes(cores)
        prefix = np.ones((1, 1), dtype=complex)
        # one optimization pass left to right; each local solve is exact, so
        # the penalized Rayleigh quotient is non-increasing at every step
        for i in range(L):
            suffix = suffixes[i]
            val, core = _local_solve(Hp, prefix, suffix, cores[i].shape, sigma, ortho)
            if core is not None:
                cores[i] = core
                energy = val
            if i < L - 1:
                r_l, d, r_r = cores[i].shape
                q, r = np.linalg.qr(cores[i].reshape(r_l * d, r_r))
                cores[i] = q.reshape(r_l, d, q.shape[1])
                cores[i + 1] = np.tensordot(r, cores[i + 1], axes=(1, 0))
                block = np.tensordot(prefix, cores[i], axes=(1, 0))
                prefix = block.reshape(-1, block.shape[2])
        _right_canonicalize_inplace(cores)
        sweeps_done = sweep + 1
        trace.append(energy)
        if abs(energy - previous) < config.energy_tol:
            converged = True
            break

    mps = Mps(tuple(cores))
    psi = to_dense(mps)
    nrm = psi.norm()
    raw = psi.coeffs / nrm if nrm > 0 else psi.coeffs
    e_free = float(np.real(np.vdot(raw, Hp @ raw) - np.vdot(raw, penalty @ raw)))
    leakage = float(np.linalg.norm((nvec - N) * raw))
    diagnostics = SweepDiagnostics(
        sweeps=sweeps_done,
        converged=converged,
        penalized_energy=float(energy),
        leakage=leakage,
        energy_trace=tuple(trace),
    )
    return mps, e_free, diagnostics


def excited_levels(H, bond_dims, N: int, count: int, config: DmrgConfig | None = None):
    """Sequential deflation against the solver's own converged lower states."""
    if count < 1:
        raise ValidationError("need count >= 1")
    config = config or DmrgConfig()
    dim = H.shape[0]
    L = int(np.log2(dim))
    dims = clip_bond_dims(bond_dims, L)
    fci = fci_levels(H, N, count)
    rng = np.random.default_rng(config.seed)
    states = []
    levels = []
    for j in range(count):
        mps, energy, diag = dmrg_minimize(
            H, dims, N, config, orthogonal_to=states, rng=rng
        )
        psi = to_dense(mps).normalized()
        states.append(psi)
        residual = float(np.linalg.norm(H @ psi.coeffs - energy * psi.coeffs))
        levels.append(
            LevelResult(
                index=j,
                energy=energy,
                fci_energy=float(fci[j]),
                sweeps=diag.sweeps,
                outer_iterations=0,
                residual=residual,
                leakage=diag.leakage,
                converged=diag.converged,
            )
        )
    report = EnergyReport(
        method="qc-dmrg",
        L=L,
        N=N,
        bond_dims=dims,
        levels=tuple(levels),
        seed=config.seed,
        config=config.to_dict(),
    )
    return report, states


# ---------------------------------------------------------------------------
# Mode optimization
# ---------------------------------------------------------------------------


def _unitary_power(U: np.ndarray, t: float) -> np.ndarray:
    K = scipy.linalg.logm(U)
    K = (K - K.conj().T) / 2.0
    return scipy.linalg.expm(t * K)


def _fock_matrix(h: np.ndarray, v: np.ndarray, occupied) -> np.ndarray:
    F = np.array(h)
    for m in occupied:
        F = F + v[:, m, :, m] - v[:, m, m, :]
    return F


def _fix_phases(C: np.ndarray) -> np.ndarray:
    """Deterministic gauge: largest component of each column real positive."""
    C = np.array(C)
    for col in range(C.shape[1]):
        lead = np.argmax(np.abs(C[:, col]))
        phase = C[lead, col] / abs(C[lead, col])
        C[:, col] = C[:, col] / phase
    return C


def _scf_rotation(h, v, psi: DenseState):
    """Fock-matrix diagonalizer step for the bond-dimension-one (determinant) case."""
    L = psi.L
    occupations = np.stack(
        [np.abs(psi.coeffs) ** 2 * occupation_table(L)[:, p] for p in range(L)]
    ).sum(axis=1)
    occupied = np.argsort(-occupations)[: int(round(occupations.sum()))]
    F = _fock_matrix(h, v, occupied)
    _, C = np.linalg.eigh(F)
    return np.conj(_fix_phases(C))


def _best_partner_orbital(H, L: int, fixed: np.ndarray):
    """Orbital x orthogonal to ``fixed`` minimizing the two-orbital determinant energy."""
    from .fock import apply_orbital_creation, creation_matrix, vacuum_state

    partner_det = apply_orbital_creation(vacuum_state(L), fixed)
    W = np.stack(
        [creation_matrix(L, p) @ partner_det.coeffs for p in range(1, L + 1)], axis=1
    )
    G_full = W.conj().T @ (H @ W)
    proj = np.eye(L) - np.outer(fixed, fixed.conj())
    u, s, _ = np.linalg.svd(proj)
    B = u[:, : L - 1]
    G = B.conj().T @ G_full @ B
    G = (G + G.conj().T) / 2.0
    evals, evecs = np.linalg.eigh(G)
    x = B @ evecs[:, 0]
    lead = np.argmax(np.abs(x))
    x = x * np.conj(x[lead]) / abs(x[lead])
    return x / np.linalg.norm(x), float(evals[0])


def _complete_orbital_basis(cols, L: int) -> np.ndarray:
    """Unitary with the given leading columns, completed along coordinate axes."""
    basis = [np.asarray(c, dtype=complex) for c in cols]
    for k in range(L):
        if len(basis) == L:
            break
        cand = np.zeros(L, dtype=complex)
        cand[k] = 1.0
        for _ in range(2):  # repeated Gram-Schmidt keeps the result unitary
            for b in basis:
                cand = cand - b * (b.conj() @ cand)
        nrm = np.linalg.norm(cand)
        if nrm > 1e-6:
            basis.append(cand / nrm)
    if len(basis) < L:  # pathological near-dependence: fall back to an SVD completion
        stacked = np.stack(basis, axis=1)
        proj = np.eye(L) - stacked @ stacked.conj().T
        u, s, _ = np.linalg.svd(proj)
        basis.extend(u[:, : L - len(basis)].T)
    return np.stack(basis, axis=1)


def _determinant_rotation(H, psi: DenseState, tol: float = 1e-13, max_iter: int = 200):
    """Exact two-orbital relaxation of the current determinant (N = 2, bond dim 1).

    Starting from the occupied pair of the current basis, each orbital is
    alternately replaced by the exact minimizer of the determinant energy with
    the other held fixed, until the pair is stationary; the basis is then
    rotated so the relaxed pair occupies the first two slots.  The determinant
    energy never increases, and fixed points are exactly the two-electron
    Hartree-Fock stationary points.
    """
    L = psi.L
    occupations = np.stack(
        [np.abs(psi.coeffs) ** 2 * occupation_table(L)[:, p] for p in range(L)]
    ).sum(axis=1)
    i, j = sorted(np.argsort(-occupations)[:2])
    x = np.zeros(L, dtype=complex)
    x[i] = 1.0
    y = np.zeros(L, dtype=complex)
    y[j] = 1.0
    prev = np.inf
    for _ in range(max_iter):
        x, _ = _best_partner_orbital(H, L, y)
        y, energy = _best_partner_orbital(H, L, x)
        if abs(energy - prev) < tol:
            break
        prev = energy
    phi = _complete_orbital_basis([x, y], L)
    return np.conj(phi)


def _fix_global_phase(psi: DenseState) -> DenseState:
    """Make the largest coefficient real positive (stabilizes rotation gauges)."""
    lead = np.argmax(np.abs(psi.coeffs))
    mag = abs(psi.coeffs[lead])
    if mag == 0.0:
        return psi
    return DenseState(psi.coeffs * np.conj(psi.coeffs[lead]) / mag, psi.L)


def _pair_rotation(psi: DenseState):
    """Natural-orbital pairing rotation of the dominant two-particle component."""
    c = AntisymmetricMatrix.from_state(_fix_global_phase(psi), tol=float("inf"))
    return normal_form(c).U


def _natural_orbital_rotation(psi: DenseState):
    """Descending natural-orbital rotation (generic N; no exactness guarantee)."""
    from .fock import rdm

    gamma = rdm(psi)
    evals, C = np.linalg.eigh(gamma)
    C = _fix_phases(C[:, ::-1])
    return C


def _deflated_sector_ground(H, N: int, sigma: float, lower) -> np.ndarray:
    """Ground state of H in the N-particle sector with lower states shifted up.

    This is the current best dense sector approximation used to steer the
    rotation step; at desk scale the sector block is tiny, so it is solved
    exactly rather than iteratively.
    """
    dim = H.shape[0]
    L = int(np.log2(dim))
    idx = np.nonzero(particle_number_table(L) == N)[0]
    block = H[np.ix_(idx, idx)] if isinstance(H, np.ndarray) else H[idx][:, idx].toarray()
    block = np.array(block, dtype=complex)
    for state in lower:
        q = state.coeffs[idx]
        block += sigma * np.outer(q, q.conj())
    block = (block + block.conj().T) / 2.0
    _, vecs = np.linalg.eigh(block)
    out = np.zeros(dim, dtype=complex)
    out[idx] = vecs[:, 0]
    return out


def _mo_outer_loop(h, v, core_energy, dims, N, config, lower_original, U0, rng, use_scf):
    """One mode-optimization run from the starting rotation U0; returns the best basis seen."""
    L = h.shape[0]
    U_tot = np.array(U0, dtype=complex)
    h_cur, v_cur = rotate_integrals(h, v, U_tot)
    lower_cur = [rotate_basis(s, U_tot) for s in lower_original]
    nvec = particle_number_table(L).astype(float)
    best = None
    warm = None
    prev_energy = np.inf
    outer_done = 0
    converged = False
    for outer in range(config.max_outer):
        outer_done = outer + 1
        H_cur = assemble_sparse(h_cur, v_cur, core_energy)
        mps, energy, diag = dmrg_minimize(
            H_cur, dims, N, config, initial=warm, orthogonal_to=lower_cur, rng=rng
        )
        psi = to_dense(mps).normalized()
        if best is None or energy < best[0]:
            best = (energy, psi, np.array(U_tot), diag)
        if use_scf:
            refined = psi
            if N == 2:
                U_step = _determinant_rotation(H_cur, psi)
            else:
                U_step = _scf_rotation(h_cur, v_cur, psi)
        else:
            # rotation from the current best dense sector approximation
            sigma = _spectral_range_estimate(H_cur) + 1.0
            refined = DenseState(
                _deflated_sector_ground(H_cur, N, sigma, lower_cur), L
            )
            U_step = (
                _pair_rotation(refined) if N == 2 else _natural_orbital_rotation(refined)
            )
        step_size = float(np.linalg.norm(U_step - np.eye(L)))
        if step_size < config.rot_tol:
            converged = True
            break
        if abs(energy - prev_energy) < config.energy_tol and outer > 4:
            converged = True  # energy stalled at a rotation fixed point
            break
        if use_scf and N != 2 and energy > prev_energy + 1e-9:
            # dampen oscillating self-consistent-field steps (generic-N path)
            U_step = _unitary_power(U_step, 0.5)
        prev_energy = energy
        h_cur, v_cur = rotate_integrals(h_cur, v_cur, U_step)
        lower_cur = [rotate_basis(s, U_step) for s in lower_cur]
        U_tot = U_tot @ U_step
        if not use_scf:
            warm = from_dense(rotate_basis(refined, U_step), max_rank=dims)
        # at bond dimension one the sweeps restart from the aufbau determinant,
        # which single-site updates cannot leave through the number penalty
    energy, psi, U_best, diag = best
    return energy, psi, U_best, diag, outer_done, converged


def mode_optimize(
    h,
    v,
    bond_dims,
    N: int,
    config: DmrgConfig | None = None,
    *,
    count: int = 1,
    core_energy: float = 0.0,
    initial_rotations=(),
):
    """Alternate DMRG sweeps with orbital-basis rotations, per energy level.

    For bond dimensions at or above the paired profile the rotation step is
    the natural-orbital pairing transform of the current solution; for bond
    dimension one it is the Fock-matrix diagonalizer, making the run a
    self-consistent-field calculation.  Each level is optimized in its own
    basis while staying orthogonal to the already-converged lower states
    (rotated alongside the integrals).  Returns ``(report, rotations)`` with
    one accumulated rotation per level.
    """
    config = config or DmrgConfig()
    h = np.asarray(h, dtype=complex)
    v = np.asarray(v, dtype=complex)
    L = h.shape[0]
    dims = clip_bond_dims(bond_dims, L)
    use_scf = all(d == 1 for d in dims)
    rng = np.random.default_rng(config.seed)

    H0 = assemble_sparse(h, v, core_energy)
    fci = fci_levels(H0, N, count)

    from .ranks import haar_unitary

    starts = [np.eye(L, dtype=complex)]
    starts.extend(np.asarray(u, dtype=complex) for u in initial_rotations)
    while len(starts) < max(config.n_starts, 1) + len(initial_rotations):
        starts.append(haar_unitary(L, rng))

    lower_original = []
    levels = []
    rotations = []
    for j in range(count):
        best = None
        for U0 in starts:
            result = _mo_outer_loop(
                h, v, core_energy, dims, N, config, lower_original, U0, rng, use_scf
            )
            if best is None or result[0] < best[0]:
                best = result
        energy, psi, U_tot, diag, outer_done, converged = best
        psi_original = rotate_basis(psi, U_tot.conj().T)
        lower_original.append(psi_original)
        rotations.append(U_tot)
        residual = float(
            np.linalg.norm(H0 @ psi_original.coeffs - energy * psi_original.coeffs)
        )
        levels.append(
            LevelResult(
                index=j,
                energy=energy,
                fci_energy=float(fci[j]),
                sweeps=diag.sweeps,
                outer_iterations=outer_done,
                residual=residual,
                leakage=diag.leakage,
                converged=converged,
            )
        )
    method = "hf-scf" if use_scf else "qc-dmrg-mo"
    notes = ()
    if count > 1:
        notes = (
            "excited energies follow the deflated definition: each level is "
            "orthogonalized against the solver's own lower states, not the "
            "dense reference eigenvectors",
        )
    report = EnergyReport(
        method=method,
        L=L,
        N=N,
        bond_dims=dims,
        levels=tuple(levels),
        seed=config.seed,
        config=config.to_dict(),
        notes=notes,
    )
    return report, rotations
