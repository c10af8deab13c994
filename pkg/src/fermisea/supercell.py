"""Supercell rHF: the L-cell ground state, defect states Q and their energies.

The supercell problem is solved as a single Gamma-point problem in the
plane-wave basis of the box ``[-aL/2, aL/2)^3`` with the box-periodic
Coulomb kernel.  A defect state is the difference ``Q = gamma - gamma0``
between a perturbed and a reference ground state, expressed in the orbital
basis of the reference, where the kinetic pairing ``Tr(H0 Q)`` and the
``Q++ / Q--`` block structure are diagonal-friendly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .bloch import (
    DEGENERACY_TOL,
    BlochFiber,
    ConvergenceError,
    GapInfo,
    ScfInfo,
    _AndersonMixer,
    assemble_fiber,
    fill_shells,
    fill_threshold,
    orbital_grids,
)
from .charges import DefectCharge, NuclearModel, mu_field_supercell, nu_field
from .coulomb import d_periodic, d_periodic_parts, hartree_potential
from .lattice import (
    FourierField,
    LatticeConfig,
    LatticeError,
    PlaneWaveBasis,
    build_supercell_basis,
    pad_field,
    restrict_field,
    scf_grid_size,
)

FILLING_MODES = ("neutral", "mu", "charge")


class PreconditionError(RuntimeError):
    """A defect-run precondition (certified gap, Fermi level in gap) fails."""


def supercell_density(basis: PlaneWaveBasis, coeff_columns: np.ndarray,
                      occupations: np.ndarray, grid_nl: int, period: float,
                      band_chunk: int = 8) -> FourierField:
    """Electron density of box-normalised plane-wave orbitals."""
    rho = np.zeros((grid_nl,) * 3)
    volume = period**3
    sel = np.flatnonzero(occupations > 0)
    for s in range(0, sel.size, band_chunk):
        idx = sel[s:s + band_chunk]
        u = orbital_grids(coeff_columns[:, idx], basis.indices, grid_nl)
        rho += np.einsum("b,bxyz->xyz", occupations[idx], np.abs(u) ** 2)
    rho /= volume
    coeffs = scipy.fft.fftn(rho) / rho.size
    return FourierField(coeffs=coeffs, period=period)


@dataclass
class SupercellState:
    """Converged state of the L-cell problem."""

    config: LatticeConfig
    box_size: int
    basis: PlaneWaveBasis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    occupations: np.ndarray
    density: FourierField          # box-periodic
    total_electrons: float

    @property
    def box_volume(self) -> float:
        return (self.box_size * self.config.lattice_constant) ** 3

    def kinetic_energy(self) -> float:
        sel = self.occupations > 0
        c = self.eigenvectors[:, sel]
        return float(np.sum(self.occupations[sel] * (self.basis.kinetic @ (np.abs(c) ** 2))))

    def homo_lumo(self):
        occ = self.occupations
        filled = occ > 1e-12
        empty = occ < 1.0 - 1e-12
        homo = float(np.max(self.eigenvalues[filled])) if np.any(filled) else -np.inf
        lumo = float(np.min(self.eigenvalues[empty])) if np.any(empty) else np.inf
        return homo, lumo

    def frontier_level(self, degen_tol: float = DEGENERACY_TOL) -> float:
        """Eigenvalue of the last (possibly fractionally) occupied shell."""
        filled = self.occupations > 1e-12
        return float(np.max(self.eigenvalues[filled]))


@dataclass
class SupercellSolution:
    state: SupercellState
    energy: float          # rHF energy of the final state (with nu if present)
    i_value: float         # the minimised objective for the requested filling
    fermi_level: float | None
    multiplier: float | None
    info: ScfInfo


def _occupy(eigs: np.ndarray, filling: str, n_electrons: float,
            fermi_level: float | None, degen_tol: float) -> np.ndarray:
    if filling == "mu":
        return fill_threshold(eigs, fermi_level)
    return fill_shells(eigs, n_electrons, degen_tol)


def supercell_energy(state: SupercellState, mu_l: FourierField,
                     nu_l: FourierField | None, zero_mode_c: float = 0.0) -> float:
    """rHF energy of a supercell state (with the defect density if given)."""
    total = state.density - mu_l
    if nu_l is not None:
        total = total - nu_l
    return state.kinetic_energy() + 0.5 * d_periodic(total, total, zero_mode_c)


def scf_supercell(config: LatticeConfig, nuclear: NuclearModel, box_size: int, *,
                  defect: DefectCharge | None = None, filling: str = "neutral",
                  fermi_level: float | None = None, charge: float = 0.0,
                  gap: GapInfo | None = None,
                  mixing: float = 0.3, tol: float = 1e-8, max_iter: int = 500,
                  initial: FourierField | None = None, anderson: bool = False,
                  zero_mode_c: float = 0.0,
                  degen_tol: float = DEGENERACY_TOL) -> SupercellSolution:
    """Self-consistent supercell ground state.

    Filling modes: ``neutral`` fills ``Z*L^3`` electrons by ascending levels,
    ``mu`` fills every level below ``fermi_level`` (grand canonical), and
    ``charge`` fills ``Z*L^3 + charge`` electrons with equal fractional
    occupation on the frontier shell.  ``i_value`` in the returned solution
    is the minimised objective: the plain energy for neutral/charge fillings
    and ``E - fermi_level * N`` for threshold filling.

    A ``gap`` from the periodic problem may be passed to enforce the
    insulating precondition of the threshold and charge modes.
    """
    if filling not in FILLING_MODES:
        raise LatticeError(f"unknown filling mode {filling!r}")
    if filling == "mu":
        if fermi_level is None:
            raise PreconditionError("threshold filling requires a Fermi level")
        if gap is not None:
            if not gap.gap_open:
                raise PreconditionError("threshold filling requires an open gap")
            if not gap.sigma_plus < fermi_level < gap.sigma_minus:
                raise PreconditionError(
                    f"fermi level {fermi_level} outside the gap "
                    f"({gap.sigma_plus}, {gap.sigma_minus})")
    if filling == "charge" and gap is not None and not gap.gap_open:
        raise PreconditionError("charge-constrained filling requires an open gap")
    if not 0.0 < mixing <= 1.0:
        raise LatticeError(f"mixing must be in (0, 1], got {mixing}")

    L = int(box_size)
    a = config.lattice_constant
    period = a * L
    grid_nl = config.grid_n * L
    basis = build_supercell_basis(config.cutoff, L, a)
    n_electrons = nuclear.Z * L**3 + (charge if filling == "charge" else 0.0)
    if filling != "mu" and n_electrons > basis.size:
        raise LatticeError(
            f"{n_electrons} electrons exceed the supercell basis size {basis.size}")

    mu_l = mu_field_supercell(nuclear, config, L)
    nu_l = nu_field(defect, L, config) if defect is not None and defect.sites else None
    # SCF-loop fields are band-limited by the basis: iterate on the exact
    # compressed grid and restore the configured grid on exit
    grid_c = scf_grid_size(config) * L
    mu_c = restrict_field(mu_l, grid_c)
    nu_c = restrict_field(nu_l, grid_c) if nu_l is not None else None

    if initial is not None:
        if initial.grid_shape not in ((grid_nl,) * 3, (grid_c,) * 3):
            raise LatticeError("initial density grid does not match the supercell grid")
        rho = restrict_field(initial, grid_c)
    else:
        rho = mu_c

    mixer = _AndersonMixer(mixing) if anderson else None
    residuals = []
    state = None
    rho_new = rho
    for _ in range(max_iter):
        total = rho - mu_c if nu_c is None else rho - mu_c - nu_c
        v = hartree_potential(total, zero_mode_c)
        fiber = assemble_fiber(basis, v)
        occ = _occupy(fiber.eigenvalues, filling, n_electrons, fermi_level, degen_tol)
        rho_new = supercell_density(basis, fiber.eigenvectors, occ, grid_c, period)
        res = (rho_new - rho).norm_l2()
        residuals.append(res)
        if res < tol:
            state = SupercellState(
                config=config, box_size=L, basis=basis,
                eigenvalues=fiber.eigenvalues, eigenvectors=fiber.eigenvectors,
                occupations=occ, density=pad_field(rho_new, grid_nl),
                total_electrons=float(np.sum(occ)))
            break
        if mixer is not None:
            mixed = mixer.update(rho.coeffs.ravel(), rho_new.coeffs.ravel())
            rho = FourierField(coeffs=mixed.reshape(rho.coeffs.shape), period=rho.period)
        else:
            rho = rho + mixing * (rho_new - rho)
    if state is None:
        raise ConvergenceError(
            f"supercell SCF (L={L}, filling={filling}) did not reach {tol} in "
            f"{max_iter} iterations (last residual {residuals[-1]:.3e})", residuals)

    energy = supercell_energy(state, mu_l, nu_l, zero_mode_c)
    if filling == "mu":
        i_value = energy - fermi_level * state.total_electrons
    else:
        i_value = energy
    multiplier = state.frontier_level(degen_tol) if filling == "charge" else None

    # residual of the returned density under one more SCF map application
    total = rho_new - mu_c if nu_c is None else rho_new - mu_c - nu_c
    fiber = assemble_fiber(basis, hartree_potential(total, zero_mode_c))
    occ2 = _occupy(fiber.eigenvalues, filling, n_electrons, fermi_level, degen_tol)
    sc_res = (supercell_density(basis, fiber.eigenvectors, occ2, grid_c, period)
              - rho_new).norm_l2()
    info = ScfInfo(iterations=len(residuals), residuals=residuals, converged=True,
                   self_consistency_residual=sc_res)
    return SupercellSolution(state=state, energy=energy, i_value=i_value,
                             fermi_level=fermi_level, multiplier=multiplier, info=info)


# ---------------------------------------------------------------------------
# Defect states
# ---------------------------------------------------------------------------

@dataclass
class DefectState:
    """Perturbation ``Q = gamma - gamma0`` in the reference orbital basis.

    ``q`` is the matrix of Q over the eigenvectors of the reference
    Hamiltonian, so blocks with respect to ``gamma0`` are index selections
    and ``Tr(H0 Q)`` is a weighted diagonal sum.
    """

    q: np.ndarray
    occ_ref: np.ndarray
    ref_eigenvalues: np.ndarray
    rho_q: FourierField
    reference: SupercellState
    perturbed: SupercellState

    @property
    def charge(self) -> float:
        """gamma0-trace of Q; equals the plain trace in finite dimension."""
        return float(np.real(np.trace(self.q)))

    @property
    def qpp(self) -> np.ndarray:
        p = self.occ_ref
        return np.outer(1 - p, 1 - p) * self.q

    @property
    def qmm(self) -> np.ndarray:
        p = self.occ_ref
        return np.outer(p, p) * self.q

    def admissibility_residual(self) -> float:
        """Most negative eigenvalue of ``Q++ - Q-- - Q^2`` (>= 0 is admissible)."""
        r = self.qpp - self.qmm - self.q @ self.q
        return float(np.linalg.eigvalsh((r + r.conj().T) / 2)[0])

    def occupation_bounds(self):
        """Extreme eigenvalues of gamma0 + Q (must lie in [0, 1])."""
        w = np.linalg.eigvalsh(np.diag(self.occ_ref.astype(complex)) + self.q)
        return float(w[0]), float(w[-1])


def defect_state(perturbed: SupercellState, reference: SupercellState) -> DefectState:
    """Assemble ``Q = gamma - gamma0`` in the reference orbital basis."""
    if perturbed.box_size != reference.box_size or \
            perturbed.basis.indices.shape != reference.basis.indices.shape or \
            not np.array_equal(perturbed.basis.indices, reference.basis.indices):
        raise LatticeError("defect and reference states use different bases")
    occ0 = reference.occupations
    if np.max(np.abs(occ0 - np.round(occ0))) > 1e-10:
        raise LatticeError("reference state must have integer occupations")
    w = reference.eigenvectors.conj().T @ perturbed.eigenvectors
    gamma1 = (w * perturbed.occupations[None, :]) @ w.conj().T
    q = gamma1 - np.diag(occ0.astype(complex))
    q = (q + q.conj().T) / 2
    rho_q = perturbed.density - reference.density
    return DefectState(q=q, occ_ref=np.round(occ0), ref_eigenvalues=reference.eigenvalues,
                       rho_q=rho_q, reference=reference, perturbed=perturbed)


@dataclass
class DefectEnergyReport:
    """Finite-volume defect energy and its pieces.

    ``e_mu`` is the grand-canonical defect energy
    ``Tr0(H0 Q) - eF Tr0(Q) - D(rho_Q, nu) + D(rho_Q, rho_Q)/2``, whose
    kinetic part uses the positive-weight form with the Fermi level as the
    gap reference.
    """

    e_mu: float
    kinetic_part: float
    coulomb_cross: float
    coulomb_self: float
    zero_mode_cross: float
    zero_mode_self: float
    charge: float
    fermi_level: float


def tr0_h0_q(dstate: DefectState, kappa: float) -> float:
    """Kinetic pairing ``Tr(|H0-k|^(1/2) (Q++ - Q--) |H0-k|^(1/2)) + k Tr0(Q)``.

    Independent of ``kappa`` inside the gap: in the reference eigenbasis the
    weighted diagonal sum telescopes back to ``sum_n lambda_n Q_nn``.
    """
    return _kinetic_part(dstate, kappa) + kappa * dstate.charge


def _kinetic_part(dstate: DefectState, kappa: float) -> float:
    weights = np.abs(dstate.ref_eigenvalues - kappa)
    diag_pp = np.real(np.diag(dstate.qpp))
    diag_mm = np.real(np.diag(dstate.qmm))
    return float(np.sum(weights * (diag_pp - diag_mm)))


def defect_energy(dstate: DefectState, nu_l: FourierField | None,
                  fermi_level: float, zero_mode_c: float = 0.0) -> DefectEnergyReport:
    """Evaluate the defect energy of an admissible Q in the reference frame."""
    kinetic = _kinetic_part(dstate, fermi_level)
    if nu_l is not None:
        cross_main, cross_zero = d_periodic_parts(dstate.rho_q, nu_l, zero_mode_c)
    else:
        cross_main, cross_zero = 0.0, 0.0
    self_main, self_zero = d_periodic_parts(dstate.rho_q, dstate.rho_q, zero_mode_c)
    e_mu = kinetic - (cross_main + cross_zero) + 0.5 * (self_main + self_zero)
    return DefectEnergyReport(
        e_mu=e_mu, kinetic_part=kinetic,
        coulomb_cross=-(cross_main + cross_zero),
        coulomb_self=0.5 * (self_main + self_zero),
        zero_mode_cross=-cross_zero, zero_mode_self=0.5 * self_zero,
        charge=dstate.charge, fermi_level=fermi_level)


# ---------------------------------------------------------------------------
# Spectral decomposition of a converged defect
# ---------------------------------------------------------------------------

@dataclass
class DefectDecomposition:
    q_pol: np.ndarray          # reference-frame matrix of chi_(-inf,Sigma)(H) - gamma0
    gamma_e: np.ndarray        # reference-frame matrix of the bound electrons
    v_pol: FourierField        # polarisation potential seen by the bound electrons
    bound_count: float
    pol_charge: float
    ambiguous: bool


def decompose_defect(dstate: DefectState, sigma_mid: float, fermi_level: float,
                     zero_mode_c: float = 0.0,
                     degen_tol: float = DEGENERACY_TOL) -> DefectDecomposition:
    """Split Q at the gap midpoint into Fermi-sea polarisation plus electrons.

    States of the perturbed mean-field operator below ``sigma_mid`` form the
    polarised sea (charge ``Tr(Q_pol)``); occupied states at or above it are
    counted as bound electrons.  The two parts recompose to Q exactly.
    """
    pert = dstate.perturbed
    ref = dstate.reference
    ambiguous = bool(np.min(np.abs(pert.eigenvalues - sigma_mid)) <= degen_tol)
    if ambiguous:
        warnings.warn("an eigenvalue sits at the gap midpoint; the polarisation/"
                      "electron split is degenerate", RuntimeWarning, stacklevel=2)
    below = pert.eigenvalues < sigma_mid
    if np.any(below & (pert.occupations < 1 - 1e-8)):
        warnings.warn("partially filled state below the gap midpoint; the split "
                      "no longer matches the converged occupations",
                      RuntimeWarning, stacklevel=2)
    w = ref.eigenvectors.conj().T @ pert.eigenvectors
    p_below = (w[:, below]) @ (w[:, below].conj().T)
    q_pol = p_below - np.diag(dstate.occ_ref.astype(complex))
    occ_e = np.where(below, 0.0, pert.occupations)
    gamma_e = (w * occ_e[None, :]) @ w.conj().T

    # orbital products are band-limited: build on the compressed grid, pad
    grid_nl = pert.density.grid_shape[0]
    grid_c = scf_grid_size(pert.config) * pert.box_size
    rho_below = pad_field(
        supercell_density(pert.basis, pert.eigenvectors, below.astype(float),
                          grid_c, pert.density.period), grid_nl)
    rho_q_pol = rho_below - ref.density
    mu_l = None
    v_pol = hartree_potential(rho_q_pol, zero_mode_c)
    return DefectDecomposition(
        q_pol=q_pol, gamma_e=gamma_e, v_pol=v_pol,
        bound_count=float(np.sum(occ_e)),
        pol_charge=float(np.real(np.trace(q_pol))),
        ambiguous=ambiguous)


def polarisation_potential(decomp: DefectDecomposition, reference: SupercellState,
                           mu_l: FourierField, zero_mode_c: float = 0.0) -> FourierField:
    """Full polarisation potential: Fermi-sea field plus the Q_pol response."""
    v_sea = hartree_potential(reference.density - mu_l, zero_mode_c)
    return v_sea + decomp.v_pol


# ---------------------------------------------------------------------------
# Charge-constrained energies and binding diagnostics
# ---------------------------------------------------------------------------

def e0_of_q(config: LatticeConfig, nuclear: NuclearModel, box_size: int,
            q_values, gap: GapInfo | None = None, initial: FourierField | None = None,
            **scf_kwargs):
    """Defect-free charge-constrained energies ``E0_L(q)`` over a charge grid.

    Returns rows ``(q, E0_L(q), frontier level)`` where the energies are
    measured from the neutral minimum computed by the same routine, so
    ``E0_L(0) = 0`` identically.
    """
    base = scf_supercell(config, nuclear, box_size, filling="charge", charge=0.0,
                         gap=gap, initial=initial, **scf_kwargs)
    rows = []
    for q in q_values:
        if float(q) == 0.0:
            rows.append((0.0, 0.0, base.state.frontier_level()))
            continue
        sol = scf_supercell(config, nuclear, box_size, filling="charge",
                            charge=float(q), gap=gap,
                            initial=base.state.density, **scf_kwargs)
        rows.append((float(q), sol.energy - base.energy, sol.multiplier))
    return rows, base


def binding_diagnostic(config: LatticeConfig, nuclear: NuclearModel, box_size: int,
                       defect: DefectCharge, q: float, qprime_values,
                       gap: GapInfo | None = None,
                       initial: FourierField | None = None, **scf_kwargs):
    """Finite-volume HVZ gaps ``E^nu_L(q-q') + E0_L(q') - E^nu_L(q)``.

    Positive entries indicate binding at this box size; a diagnostic only,
    reported but never asserted.
    """
    reference = scf_supercell(config, nuclear, box_size, filling="charge",
                              charge=0.0, gap=gap, initial=initial, **scf_kwargs)
    has_defect = defect is not None and bool(defect.sites)
    c = scf_kwargs.get("zero_mode_c", 0.0)
    mu_l = mu_field_supercell(nuclear, config, box_size)
    if has_defect:
        nu_l = nu_field(defect, box_size, config)
        e_ref_nu = supercell_energy(reference.state, mu_l, nu_l, c)
    free_cache: dict = {0.0: 0.0}
    nu_cache: dict = {}

    def e_free(qq: float) -> float:
        if qq not in free_cache:
            sol = scf_supercell(config, nuclear, box_size, filling="charge",
                                charge=qq, gap=gap, initial=reference.state.density,
                                **scf_kwargs)
            free_cache[qq] = sol.energy - reference.energy
        return free_cache[qq]

    def e_nu(qq: float) -> float:
        if not has_defect:
            return e_free(qq)
        if qq not in nu_cache:
            sol = scf_supercell(config, nuclear, box_size, defect=defect,
                                filling="charge", charge=qq, gap=gap,
                                initial=reference.state.density, **scf_kwargs)
            nu_cache[qq] = sol.energy - e_ref_nu
        return nu_cache[qq]

    e_nu_q = e_nu(float(q))
    rows = []
    for qp in qprime_values:
        qp = float(qp)
        if qp == 0.0:
            rows.append((qp, 0.0))
        else:
            rows.append((qp, e_nu(float(q) - qp) + e_free(qp) - e_nu_q))
    return rows


# ---------------------------------------------------------------------------
# Random admissible perturbations (test and demo helper)
# ---------------------------------------------------------------------------

def random_admissible_q(reference: SupercellState, rng: np.random.Generator,
                        n_rotations: int = 4, complex_phases: bool = True) -> np.ndarray:
    """Reference-frame matrix of ``P - gamma0`` for a random projector P.

    P is built by rotating occupied/virtual pairs of the reference projector
    by random angles, so the result is an extreme point of the admissible
    set (convex combinations of two such draws stay admissible).
    """
    occ = np.round(reference.occupations)
    m = occ.size
    gamma = np.diag(occ.astype(complex))
    occupied = np.flatnonzero(occ > 0.5)
    virtual = np.flatnonzero(occ < 0.5)
    u = np.eye(m, dtype=complex)
    for _ in range(n_rotations):
        i = int(rng.choice(occupied))
        a = int(rng.choice(virtual))
        theta = rng.uniform(0.05, 1.2)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi)) if complex_phases else 1.0
        g = np.eye(m, dtype=complex)
        g[i, i] = np.cos(theta)
        g[a, a] = np.cos(theta)
        g[i, a] = -np.conj(phase) * np.sin(theta)
        g[a, i] = phase * np.sin(theta)
        u = g @ u
    p = u @ gamma @ u.conj().T
    q = p - gamma
    return (q + q.conj().T) / 2


def materialize_defect_state(reference: SupercellState, q: np.ndarray) -> DefectState:
    """Wrap an abstract reference-frame Q into a DefectState with its density.

    Diagonalises ``gamma0 + Q``, synthesises the perturbed orbitals in the
    plane-wave basis and rebuilds the density, so Coulomb terms of arbitrary
    admissible perturbations can be evaluated.
    """
    occ0 = np.round(reference.occupations)
    gamma = np.diag(occ0.astype(complex)) + q
    weights, u = np.linalg.eigh(gamma)
    weights = np.clip(weights, 0.0, None)
    coeffs = reference.eigenvectors @ u
    grid_nl = reference.density.grid_shape[0]
    grid_c = scf_grid_size(reference.config) * reference.box_size
    rho = pad_field(
        supercell_density(reference.basis, coeffs, weights, grid_c,
                          reference.density.period), grid_nl)
    pert = SupercellState(
        config=reference.config, box_size=reference.box_size, basis=reference.basis,
        eigenvalues=reference.eigenvalues, eigenvectors=coeffs,
        occupations=weights, density=rho, total_electrons=float(np.sum(weights)))
    return DefectState(q=q.copy(), occ_ref=occ0, ref_eigenvalues=reference.eigenvalues,
                       rho_q=rho - reference.density, reference=reference,
                       perturbed=pert)


def state_energy_with_defect(state: SupercellState, mu_l: FourierField,
                             nu_l: FourierField | None,
                             zero_mode_c: float = 0.0) -> float:
    """rHF energy of any supercell state in the (possibly defective) functional."""
    return supercell_energy(state, mu_l, nu_l, zero_mode_c)
