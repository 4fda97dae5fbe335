"""FCIDUMP import: Molpro-style electron integral files to spin-orbital form.

The text format holds real spatial-orbital integrals in chemist notation
``(pq|rs)`` after a namelist header.  Records route by their zero indices:
``value p q 0 0`` is a one-electron integral, ``value 0 0 0 0`` the scalar
core energy, four nonzero indices a two-electron integral.  On load the
8-fold permutational symmetry of real integrals is expanded, spatial
orbitals become ``2 * NORB`` spin orbitals with interleaved spins (spin
orbital ``2p - 1`` is ``p`` alpha, ``2p`` is ``p`` beta), and the result is
re-expressed in the physicist convention used by the solver.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

import numpy as np

from .dmrg import TwoBodyHamiltonian
from .fock import ValidationError


@dataclass(frozen=True)
class FcidumpData:
    """Raw parsed content of one FCIDUMP file (spatial orbitals, chemist order)."""

    norb: int
    nelec: int
    ms2: int
    orbsym: tuple
    isym: int
    h: np.ndarray
    v_chem: np.ndarray
    core_energy: float
    records: tuple

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.norb


_HEADER_INT = {"NORB", "NELEC", "MS2", "ISYM"}


def _parse_header(text: str) -> dict:
    body = text.replace("\n", " ")
    fields = {}
    for key in _HEADER_INT:
        match = re.search(rf"{key}\s*=\s*([+-]?\d+)", body, re.IGNORECASE)
        if match:
            fields[key] = int(match.group(1))
    match = re.search(r"ORBSYM\s*=\s*([\d,\s]+?)(?=[A-Za-z/&$]|$)", body, re.IGNORECASE)
    if match:
        syms = [int(tok) for tok in re.split(r"[,\s]+", match.group(1).strip()) if tok]
        fields["ORBSYM"] = tuple(syms)
    if "NORB" not in fields:
        raise ValidationError("FCIDUMP header does not define NORB")
    return fields


def read_fcidump(path) -> FcidumpData:
    """Parse an FCIDUMP file into spatial-orbital integral tables."""
    with open(path) as fh:
        text = fh.read()
    # header runs until &END or a bare / on its own namelist line
    end = re.search(r"(&END|[/$]END|\n\s*/\s*\n|\s/\s)", text, re.IGNORECASE)
    if end is None:
        raise ValidationError("FCIDUMP header terminator (&END or /) not found")
    header = _parse_header(text[: end.end()])
    norb = header["NORB"]
    if norb < 1:
        raise ValidationError(f"invalid NORB={norb}")
    nelec = header.get("NELEC", 0)
    ms2 = header.get("MS2", 0)
    isym = header.get("ISYM", 1)
    orbsym = header.get("ORBSYM", tuple([1] * norb))
    if any(s != 1 for s in orbsym):
        warnings.warn(
            "ORBSYM declares nontrivial point-group labels; they are read but ignored",
            stacklevel=2,
        )

    h = np.zeros((norb, norb))
    v = np.zeros((norb, norb, norb, norb))
    core = 0.0
    records = []
    for lineno, line in enumerate(text[end.end() :].splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise ValidationError(
                f"malformed integral record on line {lineno}: {line.strip()!r}"
            )
        if "(" in tokens[0] or ")" in tokens[0]:
            raise ValidationError(
                "complex-valued FCIDUMP integrals are not supported"
            )
        try:
            value = float(tokens[0].replace("D", "E").replace("d", "e"))
            p, q, r, s = (int(t) for t in tokens[1:])
        except ValueError as exc:
            raise ValidationError(
                f"malformed integral record on line {lineno}: {line.strip()!r}"
            ) from exc
        for idx in (p, q, r, s):
            if idx < 0 or idx > norb:
                raise ValidationError(
                    f"orbital index {idx} out of range 1..{norb} on line {lineno}"
                )
        records.append((value, p, q, r, s))
        if p == 0 and q == 0 and r == 0 and s == 0:
            core = value
        elif r == 0 and s == 0:
            if p == 0 or q == 0:
                warnings.warn(
                    f"skipping orbital-energy record on line {lineno}", stacklevel=2
                )
                continue
            h[p - 1, q - 1] = value
            h[q - 1, p - 1] = value
        elif p == 0 or q == 0 or r == 0 or s == 0:
            raise ValidationError(
                f"record with a partial zero index pattern on line {lineno}"
            )
        else:
            # real chemist integrals: expand the 8-fold permutation orbit
            for a, b, c, d in (
                (p, q, r, s),
                (q, p, r, s),
                (p, q, s, r),
                (q, p, s, r),
                (r, s, p, q),
                (s, r, p, q),
                (r, s, q, p),
                (s, r, q, p),
            ):
                v[a - 1, b - 1, c - 1, d - 1] = value
    return FcidumpData(
        norb=norb,
        nelec=nelec,
        ms2=ms2,
        orbsym=tuple(orbsym),
        isym=isym,
        h=h,
        v_chem=v,
        core_energy=core,
        records=tuple(records),
    )


def to_spin_orbital(data: FcidumpData) -> TwoBodyHamiltonian:
    """Expand spatial chemist integrals to spin-orbital physicist integrals."""
    n = data.norb
    L = 2 * n
    h_so = np.zeros((L, L), dtype=complex)
    # spin orbital 2p-1 (index 2(p-1)) is p-alpha, 2p (index 2p-1) is p-beta
    for spin in (0, 1):
        h_so[spin::2, spin::2] = data.h
    v_so = np.zeros((L, L, L, L), dtype=complex)
    # physicist <ij|kl> = chemist (ik|jl) with matching spins i-k and j-l
    spatial = np.arange(n)
    for si in (0, 1):
        for sj in (0, 1):
            i = 2 * spatial[:, None, None, None] + si
            k = 2 * spatial[None, None, :, None] + si
            j = 2 * spatial[None, :, None, None] + sj
            l = 2 * spatial[None, None, None, :] + sj
            v_so[i, j, k, l] = data.v_chem[
                spatial[:, None, None, None],
                spatial[None, None, :, None],
                spatial[None, :, None, None],
                spatial[None, None, None, :],
            ]
    return TwoBodyHamiltonian(h_so, v_so, L, core_energy=data.core_energy)


def parse_fcidump(path) -> TwoBodyHamiltonian:
    """Read an FCIDUMP file and return the spin-orbital Hamiltonian."""
    return to_spin_orbital(read_fcidump(path))
