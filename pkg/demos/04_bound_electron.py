"""A bound electron in the gap of the perturbed crystal.

An attractive charge-one defect pulls a singlet level into the band gap.
Filling it (charge-constrained, then grand-canonical at a Fermi level just
above the level) and splitting the perturbation at the gap midpoint yields
a neutral polarisation of the Fermi sea plus exactly one bound electron.
The script ends with the finite-box binding inequalities.
"""

import numpy as np

from fermisea import fixtures as fx
from fermisea.bloch import scf_periodic
from fermisea.lattice import embed_unit_field
from fermisea.supercell import (
    binding_diagnostic,
    decompose_defect,
    defect_energy,
    defect_state,
    scf_supercell,
)
from fermisea.charges import nu_field

L = 2
nuc = fx.insulator_nuclear()
cfg = fx.insulator_config(bz_size=L)
per = scf_periodic(cfg, nuc, mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
gap = per.gap
print(f"gap: ({gap.sigma_plus:.6f}, {gap.sigma_minus:.6f}), "
      f"midpoint Sigma = {gap.midpoint:.6f}")

reference = scf_supercell(cfg, nuc, L, mixing=fx.SCF_MIXING, tol=fx.SCF_TOL,
                          initial=embed_unit_field(per.state.density, L))
defect = fx.bound_state_defect()
print(f"defect: charge {defect.total_charge:+.2f} at {defect.sites[0].center}")

charged = scf_supercell(cfg, nuc, L, defect=defect, filling="charge", charge=1.0,
                        gap=gap, mixing=0.35, tol=fx.SCF_TOL,
                        initial=reference.state.density)
ev, occ = charged.state.eigenvalues, charged.state.occupations
in_window = (ev >= gap.midpoint) & (occ > 0.5)
level = float(ev[in_window][0])
next_level = float(np.min(ev[ev > level + 1e-9]))
print(f"gap level at {level:.6f} (occupied), next level {next_level:.6f}")

ef = 0.5 * (level + next_level)
grand = scf_supercell(cfg, nuc, L, defect=defect, filling="mu", fermi_level=ef,
                      gap=gap, mixing=0.35, tol=fx.SCF_TOL,
                      initial=charged.state.density)
ds = defect_state(grand.state, reference.state)
print(f"grand-canonical at eF = {ef:.6f}: charge Tr(Q) = {ds.charge:+.8f}")

dec = decompose_defect(ds, gap.midpoint, ef)
print(f"decomposition at Sigma: bound electrons = {dec.bound_count:.10f}, "
      f"sea polarisation charge = {dec.pol_charge:+.2e}")
recomposed = dec.q_pol + dec.gamma_e
print(f"recomposition error |Q_pol + gamma_e - Q| = "
      f"{np.max(np.abs(recomposed - ds.q)):.2e}")

nu_l = nu_field(defect, L, cfg)
report = defect_energy(ds, nu_l, ef)
print(f"defect energy pieces: kinetic {report.kinetic_part:+.6f}, "
      f"cross {report.coulomb_cross:+.6f}, self {report.coulomb_self:+.6f}, "
      f"total {report.e_mu:+.6f} Ha")

print("\nbinding diagnostics E^nu(q-q') + E0(q') - E^nu(q) at q = 1:")
rows = binding_diagnostic(cfg, nuc, L, defect, 1.0, [-0.5, 0.5, 1.0],
                          gap=gap, initial=reference.state.density,
                          mixing=0.35, tol=fx.SCF_TOL)
for qp, val in rows:
    print(f"  q' = {qp:+.1f}: {val:+.9f}  "
          f"({'binding' if val > 0 else 'no binding'} at this box size)")
