"""Plane-wave reduced Hartree-Fock for periodic crystals with local defects."""

__version__ = "0.1.0"

from .bloch import (
    BlochFiber,
    ConvergenceError,
    CrystalState,
    GapInfo,
    IllConditionedError,
    assemble_fiber,
    aufbau_fill,
    check_gap,
    contour_projector,
    scf_periodic,
)
from .charges import DefectCharge, DefectSite, NuclearModel, mu_field, nu_field
from .coulomb import (
    d_free,
    d_periodic,
    g_coefficient,
    gaussian_interaction,
    hartree_potential,
)
from .harness import SweepResult, density_convergence, richardson_extrapolate, sweep_boxes
from .lattice import (
    FourierField,
    LatticeConfig,
    LatticeError,
    PlaneWaveBasis,
    brillouin_mesh,
    build_basis,
    build_supercell_basis,
    periodize_defect,
)
from .supercell import (
    DefectEnergyReport,
    DefectState,
    PreconditionError,
    SupercellState,
    binding_diagnostic,
    decompose_defect,
    defect_energy,
    defect_state,
    e0_of_q,
    scf_supercell,
    tr0_h0_q,
)

__all__ = [name for name in dir() if not name.startswith("_")]
