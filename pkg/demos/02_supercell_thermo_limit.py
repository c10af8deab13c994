"""Thermodynamic limit of the defect-free supercell.

The supercell problem block-diagonalises over the Brillouin mesh of the box,
so its spectrum is the union of the unit-cell fibers and its energy is
exactly L^3 times the mesh-sampled cell energy.  As the box grows, the
energy per cell, the density and the whole band structure converge to the
periodic reference; the eigenvalue drift is bounded by the sup norm of the
potential created by the density mismatch.
"""

import numpy as np

from fermisea import fixtures as fx
from fermisea.bloch import assemble_fiber, scf_periodic
from fermisea.charges import mu_field
from fermisea.coulomb import hartree_potential
from fermisea.harness import density_convergence
from fermisea.lattice import brillouin_mesh, build_basis, embed_unit_field, fold_to_unit_cell
from fermisea.supercell import scf_supercell

nuc = fx.insulator_nuclear()
print("reference crystal (bz 8) ...")
ref = scf_periodic(fx.insulator_config(bz_size=fx.REFERENCE_BZ), nuc,
                   mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
print(f"I0_per = {ref.energy:.10f} Ha\n")

# one honest dense supercell solve, checked against the Bloch route
L = 2
cfg = fx.insulator_config(bz_size=L)
per = scf_periodic(cfg, nuc, mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
sc = scf_supercell(cfg, nuc, L, mixing=fx.SCF_MIXING, tol=fx.SCF_TOL,
                   initial=embed_unit_field(per.state.density, L))
rho = fold_to_unit_cell(sc.state.density, cfg.grid_n)
v = hartree_potential(rho - mu_field(nuc, cfg))
union = np.sort(np.concatenate([
    assemble_fiber(build_basis(cfg, xi), v).eigenvalues
    for xi in brillouin_mesh(L, fx.INSULATOR_A)]))
print(f"L={L} supercell: {sc.state.basis.size} plane waves, "
      f"{int(sc.state.total_electrons)} electrons")
print(f"  I0_sc,L vs L^3 x cell energy: rel. diff "
      f"{abs(sc.i_value - L**3 * per.energy) / sc.i_value:.2e}")
print(f"  eigenvalue multiset vs fiber union: max diff "
      f"{np.max(np.abs(union - np.sort(sc.state.eigenvalues))):.2e}\n")

print("convergence toward the reference (Bloch route):")
rows, _ = density_convergence(fx.insulator_config(), nuc, [1, 2, 3, 4],
                              reference=ref, mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
print(f"{'L':>3} {'|rho_L - rho|_L2':>18} {'|Phi_L|_inf':>14} {'sup|dlambda|':>14}")
for box, rho_l2, phi_inf, dev in rows:
    flag = "  (bound holds)" if dev <= phi_inf else "  (bound VIOLATED)"
    print(f"{box:>3} {rho_l2:>18.3e} {phi_inf:>14.3e} {dev:>14.3e}{flag}")

print()
print(f"{'L':>3} {'I0_sc,L / L^3':>16} {'|dev from ref|':>16}")
for box in (1, 2, 3, 4):
    sol = scf_periodic(fx.insulator_config(bz_size=box), nuc,
                       mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
    print(f"{box:>3} {sol.energy:>16.9f} {abs(sol.energy - ref.energy):>16.3e}")
