"""Re-derive the certification numbers frozen in fermisea.fixtures.

The shipped insulating crystal is a lattice of smeared unit-charge nuclei at
spacing 10 Bohr.  This script re-runs the self-consistent field at the
fixture mesh and at two refinements, reports the band edges seen by each
solution on one fixed dense probe mesh, and prints the values that the
fixtures module freezes.  Runtime: about a minute.
"""

import numpy as np

from fermisea import fixtures as fx
from fermisea.bloch import assemble_fiber, scf_periodic
from fermisea.charges import mu_field
from fermisea.coulomb import hartree_potential
from fermisea.lattice import brillouin_mesh, build_basis

nuc = fx.insulator_nuclear()
probe = brillouin_mesh(6, fx.INSULATOR_A)

print(f"crystal: Z={nuc.Z} sigma={nuc.sigma} a={fx.INSULATOR_A} Bohr, "
      f"cutoff={fx.INSULATOR_CUTOFF} Ha, grid {fx.INSULATOR_GRID}^3")
print()

edges = {}
for bz in (fx.INSULATOR_BZ, fx.INSULATOR_BZ + 1, fx.REFERENCE_BZ):
    cfg = fx.insulator_config(bz_size=bz)
    sol = scf_periodic(cfg, nuc, mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
    v = hartree_potential(sol.state.density - mu_field(nuc, cfg))
    top, bottom = -np.inf, np.inf
    for xi in probe:
        ev = assemble_fiber(build_basis(cfg, xi), v).eigenvalues
        top = max(top, ev[0])
        bottom = min(bottom, ev[1])
    edges[bz] = (top, bottom)
    g = sol.gap
    print(f"bz={bz}: I0_per = {sol.energy:.10f} Ha   iterations = {sol.info.iterations}")
    print(f"        mesh band edges: Sigma+ = {g.sigma_plus:.8f}, "
          f"Sigma- = {g.sigma_minus:.8f}, open = {g.gap_open}")
    print(f"        probe-mesh edges: ({top:.8f}, {bottom:.8f})")

b0, b1 = fx.INSULATOR_BZ, fx.INSULATOR_BZ + 1
print()
print("probe-edge drift under mesh refinement "
      f"{b0}->{b1}: dSigma+ = {abs(edges[b0][0] - edges[b1][0]):.2e}, "
      f"dSigma- = {abs(edges[b0][1] - edges[b1][1]):.2e}")
print(f"frozen stability bound: {fx.CERT_EDGE_STABILITY:.1e}")
print()
print("frozen certification values:")
print(f"  CERT_SIGMA_PLUS  = {fx.CERT_SIGMA_PLUS}")
print(f"  CERT_SIGMA_MINUS = {fx.CERT_SIGMA_MINUS}")
print(f"  CERT_FERMI       = {fx.CERT_FERMI}")
