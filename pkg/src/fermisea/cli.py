"""Command-line front end.

Every subcommand reads a TOML run configuration, writes JSON or CSV
artifacts atomically into ``--out`` and embeds the configuration hash and
tool version in each output, so results are traceable and reruns in
deterministic mode are byte-identical apart from the timestamp field.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np

from . import __version__
from .bloch import band_path, check_gap, hartree_potential, scf_periodic
from .charges import DefectCharge, mu_field
from .config import ConfigError, RunConfig, load_config, write_csv, write_json
from .harness import density_convergence, sweep_boxes
from .lattice import LatticeConfig, LatticeError, embed_unit_field
from .oracle import oracle_coulomb, oracle_eigensolve, oracle_projector_identities
from .supercell import (
    PreconditionError,
    binding_diagnostic,
    e0_of_q,
    scf_supercell,
)

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _meta(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash, "version": __version__,
            "units": "hartree", "generated_at": _now()}


def _solver_kwargs(cfg: RunConfig) -> dict:
    s = cfg.solver
    return {"mixing": s.mixing, "tol": s.tol, "max_iter": s.max_iter,
            "anderson": s.anderson, "zero_mode_c": s.zero_mode_c}


def _periodic(cfg: RunConfig, bz_size: int | None = None):
    lat = cfg.lattice if bz_size is None else LatticeConfig(
        cutoff=cfg.lattice.cutoff, bz_size=bz_size, grid_n=cfg.lattice.grid_n,
        lattice_constant=cfg.lattice.lattice_constant)
    kwargs = _solver_kwargs(cfg)
    if cfg.solver.deterministic:
        kwargs["workers"] = 1
    return scf_periodic(lat, cfg.nuclear, **kwargs)


def _gap_payload(gap) -> dict:
    return {"sigma_plus": gap.sigma_plus, "sigma_minus": gap.sigma_minus,
            "open": gap.gap_open, "midpoint": gap.midpoint,
            "fermi_level": gap.fermi_level}


def _fermi_level(cfg: RunConfig, gap, override=None) -> float:
    ef = override if override is not None else cfg.run.ef
    if ef is None:
        if not gap.gap_open:
            raise PreconditionError(
                "no Fermi level given and the gap is closed; refusing the run")
        ef = gap.midpoint
    return float(ef)


def _out_path(args, name: str) -> str:
    return os.path.join(args.out, name)


def cmd_scf_periodic(args) -> int:
    cfg = load_config(args.config)
    sol = _periodic(cfg)
    payload = {
        "I0_per": sol.energy,
        "gap": _gap_payload(sol.gap),
        "iterations": sol.info.iterations,
        "residuals": sol.info.residuals,
        "self_consistency_residual": sol.info.self_consistency_residual,
        "electrons_per_cell": sol.state.electrons_per_cell,
        **_meta(cfg),
    }
    write_json(_out_path(args, "scf_periodic.json"), payload)
    print(f"I0_per = {sol.energy:.10f}  gap_open = {sol.gap.gap_open}")
    return 0


def cmd_bands(args) -> int:
    cfg = load_config(args.config)
    sol = _periodic(cfg)
    mu = mu_field(cfg.nuclear, cfg.lattice)
    v = hartree_potential(sol.state.density - mu, cfg.solver.zero_mode_c)
    corners = []
    for part in args.path.split(":"):
        coords = [float(x) for x in part.split(",")]
        if len(coords) != 3:
            raise ConfigError(f"path corner {part!r} is not a 3-vector")
        corners.append(coords)
    rows = []
    for xi, vals in band_path(cfg.lattice, v, corners,
                              n_per_segment=args.points, n_bands=args.bands):
        for n, lam in enumerate(vals, start=1):
            rows.append((xi[0], xi[1], xi[2], n, float(lam)))
    write_csv(_out_path(args, "bands.csv"),
              ["xi1", "xi2", "xi3", "n", "lambda_hartree"], rows)
    print(f"wrote {len(rows)} band rows")
    return 0


def _load_defect_override(path: str) -> DefectCharge:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    sites = data.get("defect", {}).get("sites", data.get("sites"))
    if not sites:
        raise ConfigError(f"{path}: no defect.sites found")
    return DefectCharge.from_lists(sites)


def cmd_supercell(args) -> int:
    cfg = load_config(args.config)
    defect = cfg.defect
    if args.defect:
        defect = _load_defect_override(args.defect)
    per = _periodic(cfg)
    gap = per.gap
    kwargs = _solver_kwargs(cfg)
    ef = None
    if args.mode == "mu":
        ef = _fermi_level(cfg, gap, args.ef)
    warm = embed_unit_field(per.state.density, args.L)
    sol = scf_supercell(cfg.lattice, cfg.nuclear, args.L, defect=defect,
                        filling=args.mode, fermi_level=ef,
                        charge=args.q if args.mode == "charge" else 0.0,
                        gap=gap, initial=warm, **kwargs)
    occ = sol.state.occupations
    payload = {
        "L": args.L,
        "mode": args.mode,
        "energy": sol.energy,
        "i_value": sol.i_value,
        "fermi_level": ef,
        "charge": args.q if args.mode == "charge" else 0.0,
        "multiplier": sol.multiplier,
        "total_electrons": sol.state.total_electrons,
        "occupations_summary": {
            "filled": int(np.sum(occ > 1 - 1e-9)),
            "fractional": int(np.sum((occ > 1e-9) & (occ < 1 - 1e-9))),
            "homo": sol.state.homo_lumo()[0],
            "lumo": sol.state.homo_lumo()[1],
        },
        "gap": _gap_payload(gap),
        "iterations": sol.info.iterations,
        **_meta(cfg),
    }
    write_json(_out_path(args, "supercell.json"), payload)
    print(f"L={args.L} mode={args.mode} energy={sol.energy:.10f}")
    return 0


def _parse_grid(spec: str):
    lo, hi, step = (float(x) for x in spec.split(":"))
    n = int(round((hi - lo) / step)) + 1
    return [lo + i * step for i in range(n)]


def cmd_e_of_q(args) -> int:
    cfg = load_config(args.config)
    per = _periodic(cfg)
    if not per.gap.gap_open:
        raise PreconditionError("charge-constrained runs require an open gap")
    warm = embed_unit_field(per.state.density, args.L)
    rows, _ = e0_of_q(cfg.lattice, cfg.nuclear, args.L, _parse_grid(args.q_grid),
                      gap=per.gap, initial=warm, **_solver_kwargs(cfg))
    write_csv(_out_path(args, "e_of_q.csv"),
              ["q", "E0_L_hartree", "frontier_level_hartree"], rows)
    print(f"wrote {len(rows)} charge rows")
    return 0


def cmd_binding(args) -> int:
    cfg = load_config(args.config)
    defect = cfg.defect
    if args.defect:
        defect = _load_defect_override(args.defect)
    if defect is None:
        raise ConfigError("binding diagnostics need a defect")
    per = _periodic(cfg)
    if not per.gap.gap_open:
        raise PreconditionError("binding diagnostics require an open gap")
    warm = embed_unit_field(per.state.density, args.L)
    rows = binding_diagnostic(cfg.lattice, cfg.nuclear, args.L, defect, args.q,
                              _parse_grid(args.qprime_grid), gap=per.gap,
                              initial=warm, **_solver_kwargs(cfg))
    write_csv(_out_path(args, "binding.csv"),
              ["q_prime", "hvz_gap_hartree"], rows)
    print(f"wrote {len(rows)} binding rows")
    return 0


def _box_list(args, cfg: RunConfig):
    if args.L_list:
        return [int(x) for x in args.L_list.split(",")]
    return cfg.run.L_list


def cmd_sweep_l(args) -> int:
    cfg = load_config(args.config)
    per = _periodic(cfg, bz_size=max(8, cfg.lattice.bz_size))
    ef = _fermi_level(cfg, per.gap, args.ef)
    result = sweep_boxes(cfg.lattice, cfg.nuclear, cfg.defect, _box_list(args, cfg),
                         ef, reference=per, gap=per.gap,
                         config_hash=cfg.config_hash,
                         mixing=cfg.solver.mixing, tol=cfg.solver.tol,
                         max_iter=cfg.solver.max_iter,
                         zero_mode_c=cfg.solver.zero_mode_c)
    rows = [(r.box_size, r.i0_per_cell, r.i0_mu, r.i_nu_mu, r.delta_i,
             r.phi_inf_norm, r.eig_deviation, r.density_l2) for r in result.rows]
    write_csv(_out_path(args, "sweep_l.csv"),
              ["L", "I0_per_cell_hartree", "I0_mu_hartree", "I_nu_mu_hartree",
               "delta_I_hartree", "phi_inf_norm", "eig_deviation", "density_l2"],
              rows)
    payload = {
        "fermi_level": ef,
        "delta_sequence": result.delta_sequence(),
        "extrapolated_delta": result.extrapolated_delta,
        "fitted_ratio": result.fitted_ratio,
        "rhs_cross_term": result.rhs_cross_term,
        "rhs_self_term": result.rhs_self_term,
        "defect_energy_estimate": result.defect_energy_estimate,
        "I0_per_reference": per.energy,
        "gap": _gap_payload(per.gap),
        **_meta(cfg),
    }
    write_json(_out_path(args, "sweep_l.json"), payload)
    print(f"delta sequence: {result.delta_sequence()}")
    return 0


def cmd_density_conv(args) -> int:
    cfg = load_config(args.config)
    per = _periodic(cfg, bz_size=max(8, cfg.lattice.bz_size))
    rows, _ = density_convergence(cfg.lattice, cfg.nuclear, _box_list(args, cfg),
                                  reference=per, mixing=cfg.solver.mixing,
                                  tol=cfg.solver.tol,
                                  zero_mode_c=cfg.solver.zero_mode_c)
    write_csv(_out_path(args, "density_conv.csv"),
              ["L", "density_l2_hartree", "phi_inf_norm", "eig_deviation"], rows)
    print(f"wrote {len(rows)} convergence rows")
    return 0


def cmd_validate(args) -> int:
    report = oracle_projector_identities(seed=1)
    ok = (report["projector_identity_residual"] < 1e-12
          and report["trace_integrality_residual"] < 1e-9
          and report["convex_min_eigenvalue"] > -1e-12)
    n = 9
    x = np.arange(n) / n
    f = np.cos(2 * np.pi * x)[:, None, None] * np.ones((1, n, n))
    d = oracle_coulomb(f, f, 1)
    ok = ok and abs(d - 1 / (2 * np.pi)) < 1e-6
    free = oracle_eigensolve(np.zeros((n, n, n)), (0, 0, 0))
    ok = ok and abs(free[0]) < 1e-10
    print("projector identities:", report)
    print(f"oracle Coulomb cos pairing: {d:.9f} (expect {1/(2*np.pi):.9f})")
    print(f"free ground level: {free[0]:.2e}")
    print("validate:", "ok" if ok else "FAILED")
    return 0 if ok else 1


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    mode = cfg.run.mode
    table = {"scf-periodic": cmd_scf_periodic, "sweep-l": cmd_sweep_l,
             "density-conv": cmd_density_conv, "validate": cmd_validate}
    if mode not in table:
        raise ConfigError(f"run.mode {mode!r} is not dispatchable "
                          f"(use one of {sorted(table)})")
    return table[mode](args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermisea",
        description="Plane-wave reduced Hartree-Fock: periodic crystals, "
                    "supercell defects, thermodynamic-limit diagnostics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("scf-periodic", help="periodic ground state and gap")
    common(p)
    p.set_defaults(func=cmd_scf_periodic)

    p = sub.add_parser("bands", help="band structure along a k-path")
    common(p)
    p.add_argument("--path", required=True,
                   help="colon-separated corners, fractions of 2*pi/a, e.g. "
                        "'0,0,0:0.5,0,0:0.5,0.5,0.5'")
    p.add_argument("--points", type=int, default=12, help="points per segment")
    p.add_argument("--bands", type=int, default=None, help="bands per k-point")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("supercell", help="one supercell solve")
    common(p)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--mode", choices=["neutral", "mu", "charge"], default="neutral")
    p.add_argument("--ef", type=float, default=None)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--defect", default=None, help="TOML file overriding the defect")
    p.set_defaults(func=cmd_supercell)

    p = sub.add_parser("e-of-q", help="defect-free charge-constrained energies")
    common(p)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--q-grid", required=True, help="lo:hi:step")
    p.set_defaults(func=cmd_e_of_q)

    p = sub.add_parser("binding", help="HVZ binding diagnostics")
    common(p)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--qprime-grid", required=True, help="lo:hi:step")
    p.add_argument("--defect", default=None)
    p.set_defaults(func=cmd_binding)

    p = sub.add_parser("sweep-l", help="thermodynamic-limit box sweep")
    common(p)
    p.add_argument("--L-list", default=None, help="comma-separated box sizes")
    p.add_argument("--ef", type=float, default=None)
    p.set_defaults(func=cmd_sweep_l)

    p = sub.add_parser("density-conv", help="density convergence diagnostics")
    common(p)
    p.add_argument("--L-list", default=None)
    p.set_defaults(func=cmd_density_conv)

    p = sub.add_parser("validate", help="run the brute-force oracle checks")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="dispatch according to run.mode in the config")
    common(p)
    p.add_argument("--L-list", default=None)
    p.add_argument("--ef", type=float, default=None)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = os.environ.get("FERMI_SEA_THREADS")
    if threads:
        os.environ.setdefault("OMP_NUM_THREADS", threads)
    try:
        return args.func(args)
    except (ConfigError, LatticeError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
