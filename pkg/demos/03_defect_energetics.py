"""Defect formation energetics and the box-size limit.

A neutral dipole is embedded in boxes of growing size; the difference of the
grand-canonical supercell minima converges to the defect energy corrected by
two analytically computable terms.  The script prints the finite-L sequence,
its Cauchy contraction, the geometric extrapolation and the resulting
defect-energy estimate, then the charge-constrained energies whose slopes
recover the band edges.
"""

from fermisea import fixtures as fx
from fermisea.bloch import scf_periodic
from fermisea.harness import richardson_extrapolate, sweep_boxes
from fermisea.lattice import embed_unit_field
from fermisea.supercell import e0_of_q

nuc = fx.insulator_nuclear()
print("reference crystal (bz 8) ...")
ref = scf_periodic(fx.insulator_config(bz_size=fx.REFERENCE_BZ), nuc,
                   mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)

dipole = fx.dipole_defect()
print(f"dipole: {[(s.center, s.amplitude) for s in dipole.sites]}\n")
result = sweep_boxes(fx.insulator_config(), nuc, dipole, [1, 2, 3],
                     fx.CERT_FERMI, reference=ref, gap=ref.gap,
                     mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
deltas = result.delta_sequence()
print(f"{'L':>3} {'delta I_L (Ha)':>16}")
for row in result.rows:
    print(f"{row.box_size:>3} {row.delta_i:>16.9f}")
diffs = [abs(deltas[i + 1] - deltas[i]) for i in range(len(deltas) - 1)]
print(f"first differences: {['%.2e' % d for d in diffs]} "
      f"(contracting: {diffs[-1] < diffs[0]})")
print(f"geometric extrapolation: {result.extrapolated_delta:.9f} "
      f"(fitted ratio {result.fitted_ratio:+.3f})")
print(f"analytic corrections: cross = {result.rhs_cross_term:+.9f}, "
      f"self = {result.rhs_self_term:+.9f}")
print(f"grand-canonical defect energy estimate: "
      f"{result.defect_energy_estimate:+.9f} Ha\n")

print("charge-constrained energies (defect-free), box L=2:")
per2 = scf_periodic(fx.insulator_config(bz_size=2), nuc,
                    mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
rows, base = e0_of_q(fx.insulator_config(bz_size=2), nuc, 2,
                     [-0.5, 0.0, 0.5], gap=ref.gap,
                     initial=embed_unit_field(per2.state.density, 2),
                     mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
g2 = per2.gap
print(f"box band edges: Sigma+ = {g2.sigma_plus:.6f}, Sigma- = {g2.sigma_minus:.6f}")
for q, e0, mult in rows:
    slope = "-" if q == 0 else f"{e0 / q:+.6f}"
    print(f"  q = {q:+.1f}: E0_L(q) = {e0:+.9f}  slope = {slope}  "
          f"frontier = {mult:+.6f}")
print("slopes approach the band edges as the box grows "
      "(electrons fill at Sigma-, holes at Sigma+).")
