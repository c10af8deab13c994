"""Frozen reference systems used by the test suite and the demos.

The insulating crystal was discovered by an empirical parameter scan and
certified once (see demos/00_certify_fixture.py for the re-derivation):
a body of smeared unit-charge nuclei on a cubic lattice of edge 10 Bohr,
whose self-consistent band structure opens an indirect gap between the
first and second bands.  The certified numbers below were measured at the
shipped discretisation and are asserted (with margins) by the tests.
"""

from __future__ import annotations

from .charges import DefectCharge, NuclearModel
from .lattice import LatticeConfig

# Insulating crystal: one smeared proton per cell at spacing 10 Bohr.
INSULATOR_A = 10.0
INSULATOR_Z = 1
INSULATOR_SIGMA = 0.45
INSULATOR_CUTOFF = 1.0
INSULATOR_GRID = 61
INSULATOR_BZ = 4          # fixture mesh; certification compares against bz 5 and 8
REFERENCE_BZ = 8          # dense mesh standing in for the infinite-crystal limit

# Certified at (bz=4, tol=1e-8); see demos/00_certify_fixture.py.
CERT_SIGMA_PLUS = 0.02501905     # max of band 1 over the fixture mesh
CERT_SIGMA_MINUS = 0.06292420    # min of band 2 over the fixture mesh
CERT_FERMI = 0.5 * (CERT_SIGMA_PLUS + CERT_SIGMA_MINUS)
CERT_GAP_WIDTH = CERT_SIGMA_MINUS - CERT_SIGMA_PLUS
# measured drift of the probe-mesh band edges when the SCF mesh refines 4->5
CERT_EDGE_STABILITY = 5e-4

SCF_TOL = 1e-8
SCF_MIXING = 0.4


def insulator_config(bz_size: int = INSULATOR_BZ) -> LatticeConfig:
    return LatticeConfig(cutoff=INSULATOR_CUTOFF, bz_size=bz_size,
                         grid_n=INSULATOR_GRID, lattice_constant=INSULATOR_A)


def insulator_nuclear() -> NuclearModel:
    return NuclearModel(Z=INSULATOR_Z, sigma=INSULATOR_SIGMA, form="gaussian")


# Defect fixtures (amplitudes tuned on the frozen crystal; see the demos).
# The bound-state defect sits off-center so the three valley-derived donor
# levels split into singlets; at this amplitude the lowest singlet lands in
# the upper half of the gap with the valence-derived riser still below the
# midpoint, and the charge-constrained SCF is stable.
BOUND_DEFECT_AMPLITUDE = 1.15
BOUND_DEFECT_WIDTH = 0.8
BOUND_DEFECT_CENTER = (1.7, 0.9, -1.1)

DIPOLE_AMPLITUDE = 0.2
DIPOLE_WIDTH = 0.8


def bound_state_defect(amplitude: float | None = None) -> DefectCharge:
    """Attractive defect tuned to pull exactly one level into the gap."""
    amp = BOUND_DEFECT_AMPLITUDE if amplitude is None else amplitude
    return DefectCharge.from_lists([
        {"center": BOUND_DEFECT_CENTER, "amplitude": amp, "width": BOUND_DEFECT_WIDTH},
    ])


def dipole_defect(amplitude: float | None = None) -> DefectCharge:
    """Neutral dipole, placed asymmetrically in the cell.

    The off-lattice placement keeps the pairing of the bare dipole with the
    crystal field nonzero, so the analytic correction terms of the
    thermodynamic-limit formula are both exercised.
    """
    amp = DIPOLE_AMPLITUDE if amplitude is None else amplitude
    return DefectCharge.from_lists([
        {"center": (-0.6, 0.3, 0.0), "amplitude": +amp, "width": DIPOLE_WIDTH},
        {"center": (1.4, 0.3, 0.0), "amplitude": -amp, "width": DIPOLE_WIDTH},
    ])
