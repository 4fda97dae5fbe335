"""Command-line harness for state generation, rank experiments, and DMRG runs.

Every command is deterministic under a fixed ``--seed``; reports embed the
seed and tolerances they were produced with.  ``--out PREFIX`` writes
``PREFIX.json`` plus, where the command is tabular, ``PREFIX.csv`` and a
rendered ``PREFIX.png``.  Exit codes: 0 success, 2 validation failure,
3 numerical non-convergence (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dmrg import (
    DmrgConfig,
    TwoBodyHamiltonian,
    assemble_sparse,
    excited_levels,
    fci_levels,
    mode_optimize,
    parent_hamiltonian,
    random_two_body,
    rotate_integrals,
)
from .fcidump import parse_fcidump
from .fock import DenseState, ValidationError, rotate_basis
from .mps import from_dense, mps_norm, to_dense, unfolding_ranks
from .pair import (
    AntisymmetricMatrix,
    build_bd3_from_dense,
    build_tail_cores,
    normal_form,
    pair_bond_profile,
    random_two_particle_state,
)
from .ranks import gamma_rank, generic_rank_law, verify_lower_bound
from . import plots


def _complex_matrix_json(arr) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(arr)]


def _complex_tensor_json(arr) -> dict:
    arr = np.asarray(arr)
    return {
        "shape": list(arr.shape),
        "data": [[float(z.real), float(z.imag)] for z in arr.reshape(-1)],
    }


def _complex_from_json(obj):
    if isinstance(obj, dict):
        flat = np.array([complex(re, im) for re, im in obj["data"]])
        return flat.reshape(obj["shape"])
    arr = np.asarray(obj, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _parse_bond_dims(text: str, L: int):
    if text.strip().lower() in ("theorem1", "optimal"):
        return pair_bond_profile(L)
    values = [int(tok) for tok in text.split(",") if tok.strip()]
    if len(values) == 1:
        values = values * (L - 1)
    if len(values) != L - 1:
        raise ValidationError(
            f"--bond-dims needs 1 or {L - 1} entries for L={L}, got {len(values)}"
        )
    return tuple(values)


def _load_integrals(path: str) -> TwoBodyHamiltonian:
    text_head = open(path, "rb").read(64)
    if text_head.lstrip().startswith(b"{"):
        with open(path) as fh:
            data = json.load(fh)
        h = _complex_from_json(data["h"])
        v = _complex_from_json(data["v"])
        return TwoBodyHamiltonian(h, v, int(data["L"]), float(data.get("core_energy", 0.0)))
    return parse_fcidump(path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_random_state(args) -> int:
    if args.L < 4 or args.L % 2 != 0:
        raise ValidationError("theorem experiments need even L >= 4")
    state = random_two_particle_state(args.L, np.random.default_rng(args.seed))
    state.save(args.out)
    rank = gamma_rank(state)
    print(f"wrote {args.out}: L={args.L} seed={args.seed} norm={state.norm():.12f}")
    if rank < args.L:
        print(f"note: density-matrix rank {rank} < L (deficient draw)", file=sys.stderr)
    return 0


def cmd_ranks(args) -> int:
    state = DenseState.load(args.state)
    out = Path(args.out)
    before = unfolding_ranks(state, tol=args.tol)
    payload = {
        "seed": args.seed,
        "trials": args.trials,
        "tol": args.tol,
        "version": __version__,
        "before": before.to_dict(),
        "after": None,
        "verdict": None,
    }
    after = None
    profile = pair_bond_profile(state.L) if state.L % 2 == 0 else None
    try:
        mps, form = build_bd3_from_dense(state)
        rotated = rotate_basis(state, form.U)
        after = unfolding_ranks(rotated, tol=args.tol)
        payload["after"] = after.to_dict()
        payload["lambdas"] = [float(l) for l in form.lambdas]
    except ValidationError as exc:
        payload["after_error"] = str(exc)
    if gamma_rank(state) == state.L:
        verdict = verify_lower_bound(state, args.trials, args.seed, tol=args.tol)
        payload["verdict"] = verdict.to_dict()
    else:
        payload["verdict_skipped"] = "density matrix rank below L"
    _write_json(out.with_suffix(".json"), payload)
    rows = []
    for k in range(1, state.L):
        rows.append(
            [
                k,
                before.ranks[k - 1],
                after.ranks[k - 1] if after else "",
                profile[k - 1] if profile else "",
            ]
        )
    _write_csv(out.with_suffix(".csv"), ["cut", "rank_before", "rank_after", "profile"], rows)
    if not args.no_figures:
        plots.rank_profile_figure(
            out.with_suffix(".png"),
            before.ranks,
            after.ranks if after else None,
            profile,
            title=f"unfolding ranks, L={state.L}",
        )
    print(f"ranks before: {list(before.ranks)}")
    if after:
        print(f"ranks after rotation: {list(after.ranks)}")
    return 0


def cmd_build_mps(args) -> int:
    state = DenseState.load(args.state)
    out = Path(args.out)
    mps, form = build_bd3_from_dense(state, tol=args.tol)
    rotated = rotate_basis(state, form.U)
    error = float(np.linalg.norm(to_dense(mps).coeffs - rotated.coeffs))
    mps.save(f"{out}_mps.json")
    form.save(f"{out}_normal_form.json")
    payload = {
        "L": state.L,
        "tol": args.tol,
        "version": __version__,
        "bond_dims": list(mps.bond_dims()),
        "lambdas": [float(l) for l in form.lambdas],
        "reconstruction_error": error,
        "files": {"mps": f"{out}_mps.json", "normal_form": f"{out}_normal_form.json"},
    }
    _write_json(out.with_suffix(".json"), payload)
    if not args.no_figures:
        ranks_in = unfolding_ranks(state)
        ranks_out = unfolding_ranks(rotated)
        plots.rank_profile_figure(
            out.with_suffix(".png"),
            ranks_in.ranks,
            ranks_out.ranks,
            pair_bond_profile(state.L) if state.L % 2 == 0 else None,
            title=f"pair-basis construction, L={state.L}",
        )
    print(f"bond dims {list(mps.bond_dims())}, reconstruction error {error:.3e}")
    return 0


def _load_dmrg_problem(args):
    if args.parent:
        state = DenseState.load(args.parent).normalized()
        form = normal_form(AntisymmetricMatrix.from_state(state))
        rotated = rotate_basis(state, form.U)
        H = parent_hamiltonian(rotated)
        return None, H, rotated.L
    if args.random:
        if args.L is None:
            raise ValidationError("--random needs --L")
        h, v = random_two_body(args.L, seed=args.seed)
        return TwoBodyHamiltonian(h, v, args.L), None, args.L
    if not args.integrals:
        raise ValidationError("need one of --integrals, --random, --parent")
    ham = _load_integrals(args.integrals)
    return ham, None, ham.L


def _report_outputs(out: Path, report, rotations, fci, args) -> None:
    payload = {
        "version": __version__,
        "report": report.to_dict(),
        "fci_levels": [float(e) for e in fci],
    }
    if rotations is not None:
        payload["rotations"] = [_complex_matrix_json(U) for U in rotations]
    _write_json(out.with_suffix(".json"), payload)
    with open(out.with_suffix(".txt"), "w") as fh:
        fh.write(report.to_text() + "\n")
    rows = [
        [lvl.index, f"{lvl.energy:.14f}", f"{lvl.fci_energy:.14f}",
         f"{abs(lvl.energy - lvl.fci_energy):.3e}", lvl.sweeps,
         lvl.outer_iterations, lvl.converged]
        for lvl in report.levels
    ]
    _write_csv(
        out.with_suffix(".csv"),
        ["level", "energy", "fci_energy", "abs_diff", "sweeps", "outer", "converged"],
        rows,
    )
    if not args.no_figures:
        plots.energy_levels_figure(
            out.with_suffix(".png"), report, title=f"{report.method}, L={report.L}"
        )
    print(report.to_text())


def cmd_dmrg(args, force_mo: bool = False) -> int:
    out = Path(args.out)
    config = DmrgConfig.load(args.config) if args.config else DmrgConfig(seed=args.seed)
    mo = force_mo or args.mo
    ham, H_direct, L = _load_dmrg_problem(args)
    N = args.N
    dims = _parse_bond_dims(args.bond_dims, L)

    if args.scan:
        if ham is None:
            raise ValidationError("--scan needs integrals (not --parent)")
        caps = [int(tok) for tok in args.scan.split(",") if tok.strip()]
        H0 = assemble_sparse(ham.h, ham.v, ham.core_energy)
        fci = fci_levels(H0, N, 1)
        rows = []
        warm_rotation = None
        for cap in sorted(caps):
            scan_dims = [cap] * (L - 1)
            extra = [warm_rotation] if warm_rotation is not None else []
            report, rotations = mode_optimize(
                ham.h, ham.v, scan_dims, N, config,
                core_energy=ham.core_energy, initial_rotations=extra,
            )
            warm_rotation = rotations[0]
            rows.append(
                {
                    "bond_dim": cap,
                    "energy": report.levels[0].energy,
                    "gap_to_fci": report.levels[0].energy - float(fci[0]),
                    "converged": report.levels[0].converged,
                }
            )
        payload = {
            "version": __version__,
            "L": L,
            "N": N,
            "seed": config.seed,
            "fci": float(fci[0]),
            "scan": rows,
        }
        _write_json(out.with_suffix(".json"), payload)
        _write_csv(
            out.with_suffix(".csv"),
            ["bond_dim", "energy", "gap_to_fci", "converged"],
            [[r["bond_dim"], f"{r['energy']:.14f}", f"{r['gap_to_fci']:.3e}", r["converged"]]
             for r in rows],
        )
        if not args.no_figures:
            plots.scan_figure(out.with_suffix(".png"), rows, float(fci[0]),
                              title=f"bond-dimension scan, L={L}")
        for r in rows:
            print(f"bond dim {r['bond_dim']}: E = {r['energy']:.12f} "
                  f"(gap {r['gap_to_fci']:.3e})")
        return 0 if all(r["converged"] for r in rows) else 3

    if mo:
        if ham is None:
            raise ValidationError("mode optimization needs integrals (not --parent)")
        report, rotations = mode_optimize(
            ham.h, ham.v, dims, N, config, count=args.levels,
            core_energy=ham.core_energy,
        )
        fci = fci_levels(assemble_sparse(ham.h, ham.v, ham.core_energy), N, args.levels)
        _report_outputs(out, report, rotations, fci, args)
    else:
        H = H_direct if H_direct is not None else assemble_sparse(
            ham.h, ham.v, ham.core_energy
        )
        report, _states = excited_levels(H, dims, N, args.levels, config)
        fci = fci_levels(H, N, args.levels)
        _report_outputs(out, report, None, fci, args)
    return 0 if report.all_converged() else 3


def cmd_tail(args) -> int:
    out = Path(args.out)
    if args.lambdas:
        with open(args.lambdas) as fh:
            data = json.load(fh)
        lams = [float(x) for x in data["lambdas"]]
        analytic = None
    else:
        lams = [args.geometric ** ell for ell in range(1, args.pairs + 1)]
        # analytic total of the untruncated geometric series
        analytic = args.geometric**2 / (1.0 - args.geometric**2)
    lengths = sorted(int(tok) for tok in args.L_list.split(",") if tok.strip())
    total_provided = float(sum(l * l for l in lams))
    chains = {}
    rows = []
    for L in lengths:
        mps = build_tail_cores(lams, L)
        chains[L] = mps
        partial = float(mps_norm(mps) ** 2)
        total = analytic if analytic is not None else total_provided
        rows.append(
            {
                "L": L,
                "norm_sq": partial,
                "tail_norm_sq": total - partial,
                "analytic_tail_sq": total - float(sum(l * l for l in lams[: L // 2])),
            }
        )
    longest = chains[lengths[-1]]
    shared = {}
    for L in lengths[:-1]:
        n_shared = L - 1
        shared[L] = all(
            np.array_equal(chains[L].cores[i], longest.cores[i]) for i in range(n_shared)
        )
    payload = {
        "version": __version__,
        "lambda_count": len(lams),
        "lengths": lengths,
        "rows": rows,
        "shared_cores_bitwise": shared,
    }
    _write_json(out.with_suffix(".json"), payload)
    _write_csv(
        out.with_suffix(".csv"),
        ["L", "norm_sq", "tail_norm_sq", "analytic_tail_sq"],
        [[r["L"], r["norm_sq"], r["tail_norm_sq"], r["analytic_tail_sq"]] for r in rows],
    )
    if not args.no_figures:
        plots.tail_decay_figure(out.with_suffix(".png"), rows, title="truncation-tail decay")
    for L, same in shared.items():
        print(f"cores 1..{L - 1} shared with L={lengths[-1]} chain: {same}")
    for r in rows:
        print(f"L={r['L']}: tail |Psi - Psi_L|^2 = {r['analytic_tail_sq']:.6e}")
    return 0


def cmd_parse_fcidump(args) -> int:
    ham = parse_fcidump(args.file)
    out = Path(args.out)
    payload = {
        "L": ham.L,
        "core_energy": ham.core_energy,
        "h": _complex_matrix_json(ham.h),
        "v": _complex_tensor_json(ham.v),
    }
    _write_json(out.with_suffix(".json"), payload)
    print(
        f"parsed {args.file}: {ham.L} spin orbitals, core energy {ham.core_energy:+.10f}"
    )
    return 0


def cmd_law(args) -> int:
    table = generic_rank_law(args.L, args.trials, args.seed, tol=args.tol)
    out = Path(args.out)
    _write_json(out.with_suffix(".json"), {"version": __version__, **table.to_dict()})
    _write_csv(
        out.with_suffix(".csv"),
        ["cut", "law", "mode", "matches"],
        [
            [k + 1, table.law[k], table.modes[k], table.match_counts[k]]
            for k in range(args.L - 1)
        ],
    )
    if not args.no_figures:
        plots.rank_profile_figure(
            out.with_suffix(".png"),
            table.modes,
            reference=table.law,
            title=f"generic rank survey, L={args.L}, {args.trials} trials",
        )
    print(f"modes: {list(table.modes)} (law interior: {list(table.law)})")
    if table.deviations:
        print(f"{len(table.deviations)} deviating trials (replay with seed {args.seed})")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p, out_required=True):
    p.add_argument("--seed", type=int, default=0, help="rng seed (default 0)")
    p.add_argument("--tol", type=float, default=1e-10, help="rank tolerance")
    p.add_argument("--out", required=out_required, help="output path prefix")
    p.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering next to reports"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairmps",
        description="Pair-basis MPS construction, rank verification, and "
        "mode-optimized DMRG for two-fermion states.",
    )
    parser.add_argument("--version", action="version", version=f"pairmps {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("random-state", help="write a Gaussian two-particle state")
    p.add_argument("--L", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_random_state)

    p = sub.add_parser("ranks", help="unfolding ranks and lower-bound verdict")
    p.add_argument("state", help="DenseState JSON file")
    p.add_argument("--trials", type=int, default=20, help="Haar rotations to test")
    _add_common(p)
    p.set_defaults(func=cmd_ranks)

    p = sub.add_parser("build-mps", help="explicit pair-basis MPS of a state")
    p.add_argument("state", help="DenseState JSON file")
    _add_common(p)
    p.set_defaults(func=cmd_build_mps)

    for name, force_mo in (("dmrg", False), ("modeopt", True)):
        p = sub.add_parser(
            name,
            help="fixed-bond-dimension eigensolver"
            + (" with mode optimization" if force_mo else ""),
        )
        p.add_argument("--integrals", help="integral file (JSON or FCIDUMP)")
        p.add_argument("--random", action="store_true", help="random seeded (h, v)")
        p.add_argument("--parent", help="state file; use minus its projector as H")
        p.add_argument("--L", type=int, help="orbital count for --random")
        p.add_argument("--N", type=int, default=2, help="particle number (default 2)")
        p.add_argument(
            "--bond-dims",
            default="theorem1",
            help='comma list, single value, or "theorem1" (default)',
        )
        p.add_argument("--levels", type=int, default=1, help="energy levels to compute")
        p.add_argument("--mo", action="store_true", help="optimize the orbital basis")
        p.add_argument("--scan", help="comma list of uniform bond-dimension caps")
        p.add_argument("--config", help="DmrgConfig JSON file")
        _add_common(p)
        p.set_defaults(func=lambda a, fm=force_mo: cmd_dmrg(a, force_mo=fm))

    p = sub.add_parser("tail", help="half-infinite chain truncations")
    p.add_argument("--lambdas", help='JSON file {"lambdas": [...]}')
    p.add_argument("--geometric", type=float, default=0.5, help="ratio if no file")
    p.add_argument("--pairs", type=int, default=24, help="amplitudes if no file")
    p.add_argument("--L-list", default="8,12,16", help="truncation lengths")
    _add_common(p)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("parse-fcidump", help="convert FCIDUMP to integral JSON")
    p.add_argument("file")
    _add_common(p)
    p.set_defaults(func=cmd_parse_fcidump)

    p = sub.add_parser("law", help="generic rank-law survey over Gaussian states")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--trials", type=int, default=50)
    _add_common(p)
    p.set_defaults(func=cmd_law)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
