"""Periodic reduced Hartree-Fock problem via Bloch decomposition.

The mean-field Hamiltonian of the perfect crystal block-diagonalises over
quasi-momenta of the Brillouin-zone mesh; each fiber is a dense hermitian
matrix in its plane-wave basis.  The ground state fills the lowest Z bands at
every mesh point (insulating filling), and the self-consistent field loop is
a damped fixed-point iteration on the electronic density.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg

from .charges import NuclearModel, mu_field
from .coulomb import d_periodic, hartree_potential
from .lattice import (
    FourierField,
    LatticeConfig,
    LatticeError,
    PlaneWaveBasis,
    brillouin_mesh,
    build_basis,
    pad_field,
    restrict_field,
    scf_grid_size,
)

DEGENERACY_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """SCF iteration exhausted without reaching the tolerance."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


class IllConditionedError(RuntimeError):
    """Spectral quantity requested too close to an eigenvalue."""


# ---------------------------------------------------------------------------
# Fibers
# ---------------------------------------------------------------------------

def potential_matrix(v: FourierField, indices: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Matrix of multiplication by V in a plane-wave basis: ``Vhat(k_i - k_j)``.

    ``indices`` are the integer reciprocal coordinates of the basis on the
    grid carrying ``v``; the difference indices are looked up modulo the
    grid size (rows are chunked to bound memory).
    """
    n = v.grid_shape[0]
    m = indices.shape[0]
    out = np.empty((m, m), dtype=complex)
    for s in range(0, m, chunk):
        blk = indices[s:s + chunk]
        d = blk[:, None, :] - indices[None, :, :]
        out[s:s + blk.shape[0]] = v.coeffs[
            np.mod(d[..., 0], n), np.mod(d[..., 1], n), np.mod(d[..., 2], n)
        ]
    return out


@dataclass
class BlochFiber:
    """Diagonalised fiber of the mean-field Hamiltonian at one quasi-momentum."""

    basis: PlaneWaveBasis
    hamiltonian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def kpoint(self):
        return self.basis.kpoint

    @property
    def size(self) -> int:
        return self.basis.size


def assemble_fiber(basis: PlaneWaveBasis, v: FourierField) -> BlochFiber:
    """Build and diagonalise ``|xi+k|^2/2 delta_kk' + Vhat(k-k')``."""
    if basis.size == 0:
        raise LatticeError("empty plane-wave basis (cutoff too small for this k-point)")
    h = potential_matrix(v, basis.indices)
    h[np.diag_indices(basis.size)] += basis.kinetic
    eigvals, eigvecs = scipy.linalg.eigh(h)
    return BlochFiber(basis=basis, hamiltonian=h, eigenvalues=eigvals, eigenvectors=eigvecs)


def orbital_grids(coeff_columns: np.ndarray, indices: np.ndarray, grid_n: int) -> np.ndarray:
    """Evaluate plane-wave orbitals on the real-space grid (batched inverse FFT)."""
    nb = coeff_columns.shape[1]
    arr = np.zeros((nb, grid_n, grid_n, grid_n), dtype=complex)
    pos = np.mod(indices, grid_n)
    arr[:, pos[:, 0], pos[:, 1], pos[:, 2]] = coeff_columns.T
    return scipy.fft.ifftn(arr, axes=(1, 2, 3)) * grid_n**3


# ---------------------------------------------------------------------------
# Occupations
# ---------------------------------------------------------------------------

def fill_shells(eigenvalues: np.ndarray, n_electrons: float,
                degen_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Aufbau filling of ascending levels, fractional at the frontier shell.

    Levels within ``degen_tol`` of the first level of a shell are treated as
    degenerate and share any fractional charge equally, which preserves the
    symmetry of the resulting density.
    """
    eigs = np.asarray(eigenvalues)
    occ = np.zeros_like(eigs, dtype=float)
    remaining = float(n_electrons)
    if remaining < -1e-12:
        raise LatticeError(f"cannot fill a negative electron count {n_electrons}")
    i = 0
    m = eigs.size
    while i < m and remaining > 1e-14:
        j = i
        while j + 1 < m and eigs[j + 1] - eigs[i] <= degen_tol:
            j += 1
        size = j - i + 1
        take = min(remaining, float(size))
        occ[i:j + 1] = take / size
        remaining -= take
        i = j + 1
    if remaining > 1e-10:
        raise LatticeError(
            f"not enough levels to place {n_electrons} electrons ({m} available)"
        )
    return occ


def fill_threshold(eigenvalues: np.ndarray, fermi_level: float) -> np.ndarray:
    """Occupation 1 for levels at or below the Fermi level, 0 above."""
    return (np.asarray(eigenvalues) <= fermi_level).astype(float)


def aufbau_fill(fibers, n_filled: int, mode: str = "count",
                fermi_level: float | None = None,
                degen_tol: float = DEGENERACY_TOL):
    """Per-fiber occupations by band count or by Fermi-level threshold.

    Count mode realises the insulating filling (Z lowest bands everywhere);
    threshold mode fills every level below ``fermi_level``.
    """
    if mode == "count":
        occ = []
        for f in fibers:
            if n_filled > f.size:
                raise LatticeError(
                    f"cannot fill {n_filled} bands in a fiber of size {f.size}"
                )
            occ.append(fill_shells(f.eigenvalues, float(n_filled), degen_tol))
        return occ
    if mode == "threshold":
        if fermi_level is None:
            raise LatticeError("threshold filling needs a Fermi level")
        return [fill_threshold(f.eigenvalues, fermi_level) for f in fibers]
    raise LatticeError(f"unknown filling mode {mode!r}")


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class CrystalState:
    """Converged periodic state: fibers, occupations and the cell density."""

    config: LatticeConfig
    fibers: list
    occupations: list
    density: FourierField
    electrons_per_cell: float

    @property
    def mesh_size(self) -> int:
        return len(self.fibers)

    def kinetic_energy_per_cell(self) -> float:
        total = 0.0
        for f, occ in zip(self.fibers, self.occupations):
            nb = np.count_nonzero(occ > 0)
            if nb == 0:
                continue
            c = f.eigenvectors[:, :nb]
            total += float(np.sum(occ[:nb] * (f.basis.kinetic @ (np.abs(c) ** 2))))
        return total / len(self.fibers)

    def band_energies(self) -> np.ndarray:
        """Eigenvalues stacked as (n_kpoints, n_bands) up to the common count."""
        nb = min(f.size for f in self.fibers)
        return np.array([f.eigenvalues[:nb] for f in self.fibers])


def density_from_fibers(fibers, occupations, grid_n: int,
                        lattice_constant: float = 1.0) -> FourierField:
    """Cell density ``(1/nk) sum_{xi,n} occ |u_n(xi, x)|^2`` (mesh average).

    Orbitals are normalised over the cell, so each carries a ``1/cell_volume``
    factor against the raw plane-wave sums.
    """
    nk = len(fibers)
    vol = lattice_constant**3
    rho = np.zeros((grid_n,) * 3)
    for f, occ in zip(fibers, occupations):
        sel = occ > 0
        if not np.any(sel):
            continue
        u = orbital_grids(f.eigenvectors[:, sel], f.basis.indices, grid_n)
        rho += np.einsum("b,bxyz->xyz", occ[sel], np.abs(u) ** 2)
    samples = rho / (nk * vol)
    coeffs = scipy.fft.fftn(samples) / samples.size
    return FourierField(coeffs=coeffs, period=lattice_constant)


@dataclass(frozen=True)
class GapInfo:
    """Band edges around the Fermi level of the Z-filled crystal."""

    sigma_plus: float       # max of band Z over the mesh
    sigma_minus: float      # min of band Z+1 over the mesh
    gap_open: bool
    midpoint: float
    fermi_level: float | None

    @property
    def width(self) -> float:
        return self.sigma_minus - self.sigma_plus


def check_gap(state: CrystalState, n_filled: int | None = None) -> GapInfo:
    """Band edges ``max lambda_Z`` / ``min lambda_{Z+1}`` over the mesh."""
    z = int(round(state.electrons_per_cell)) if n_filled is None else int(n_filled)
    if any(f.size < z + 1 for f in state.fibers):
        raise LatticeError(f"need at least {z + 1} bands to probe the gap")
    top = max(float(f.eigenvalues[z - 1]) for f in state.fibers)
    bottom = min(float(f.eigenvalues[z]) for f in state.fibers)
    gap_open = top < bottom
    mid = 0.5 * (top + bottom)
    return GapInfo(sigma_plus=top, sigma_minus=bottom, gap_open=gap_open,
                   midpoint=mid, fermi_level=mid if gap_open else None)


# ---------------------------------------------------------------------------
# SCF driver
# ---------------------------------------------------------------------------

@dataclass
class ScfInfo:
    iterations: int
    residuals: list
    converged: bool
    self_consistency_residual: float = np.nan


@dataclass
class PeriodicSolution:
    state: CrystalState
    gap: GapInfo
    energy: float           # energy per unit cell
    info: ScfInfo


def _worker_count() -> int:
    env = os.environ.get("FERMI_SEA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _solve_fibers(bases, v, workers):
    if workers > 1 and len(bases) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # results collected in mesh order: deterministic reduction
            return list(pool.map(lambda b: assemble_fiber(b, v), bases))
    return [assemble_fiber(b, v) for b in bases]


class _AndersonMixer:
    """Small-history Anderson acceleration of the density fixed point."""

    def __init__(self, beta: float, history: int = 5):
        self.beta = beta
        self.history = history
        self.xs: list = []
        self.fs: list = []

    def update(self, x: np.ndarray, fx: np.ndarray) -> np.ndarray:
        r = fx - x
        self.xs.append(x.copy())
        self.fs.append(r.copy())
        if len(self.xs) > self.history:
            self.xs.pop(0)
            self.fs.pop(0)
        m = len(self.xs)
        if m == 1:
            return x + self.beta * r
        dr = np.stack([self.fs[i + 1] - self.fs[i] for i in range(m - 1)])
        dx = np.stack([self.xs[i + 1] - self.xs[i] for i in range(m - 1)])
        a = dr @ dr.conj().T
        b = dr @ r.conj()
        try:
            gamma = np.linalg.solve(a + 1e-12 * np.trace(a).real * np.eye(m - 1), b)
        except np.linalg.LinAlgError:
            gamma = np.zeros(m - 1)
        corr = gamma.real @ (dx + self.beta * dr)
        return x + self.beta * r - corr


def scf_periodic(config: LatticeConfig, nuclear: NuclearModel, *,
                 mixing: float = 0.3, tol: float = 1e-8, max_iter: int = 500,
                 initial: str | FourierField = "nuclear", anderson: bool = False,
                 zero_mode_c: float = 0.0, workers: int | None = None,
                 degen_tol: float = DEGENERACY_TOL) -> PeriodicSolution:
    """Self-consistent Fermi sea of the perfect crystal.

    Iterates ``rho -> density(aufbau(H[rho]))`` with linear (optionally
    Anderson-accelerated) mixing until the L^2 cell-density residual drops
    below ``tol``.  Returns the converged state, its gap data and the ground
    state energy per unit cell (kinetic Bloch average plus half the periodic
    Coulomb pairing of ``rho - mu`` with itself).

    Raises
    ------
    ConvergenceError
        carrying the residual history, if ``max_iter`` is exhausted.
    """
    if not 0.0 < mixing <= 1.0:
        raise LatticeError(f"mixing must be in (0, 1], got {mixing}")
    if tol <= 0:
        raise LatticeError(f"tol must be positive, got {tol}")
    mesh = brillouin_mesh(config.bz_size, config.lattice_constant)
    bases = [build_basis(config, xi) for xi in mesh]
    if nuclear.Z + 1 > min(b.size for b in bases):
        raise LatticeError(
            f"Z={nuclear.Z} needs more bands than the smallest fiber basis provides"
        )
    workers = _worker_count() if workers is None else max(1, workers)
    mu = mu_field(nuclear, config)
    grid_n = config.grid_n
    # every SCF-loop field is band-limited by the basis, so the iteration
    # runs exactly on the compressed grid; the full grid enters once at the end
    grid_c = scf_grid_size(config)
    mu_c = restrict_field(mu, grid_c)

    if isinstance(initial, FourierField):
        rho = restrict_field(initial, grid_c)
    elif initial == "nuclear":
        rho = mu_c
    elif initial == "uniform":
        coeffs = np.zeros((grid_c,) * 3, dtype=complex)
        coeffs[0, 0, 0] = nuclear.Z / config.cell_volume
        rho = FourierField(coeffs=coeffs, period=config.lattice_constant)
    else:
        raise LatticeError(f"unknown initial density {initial!r}")

    mixer = _AndersonMixer(mixing) if anderson else None
    residuals = []
    fibers = None
    occ = None
    rho_new = rho
    for _ in range(max_iter):
        v = hartree_potential(rho - mu_c, zero_mode_c)
        fibers = _solve_fibers(bases, v, workers)
        occ = aufbau_fill(fibers, nuclear.Z, "count", degen_tol=degen_tol)
        rho_new = density_from_fibers(fibers, occ, grid_c, config.lattice_constant)
        res = (rho_new - rho).norm_l2()
        residuals.append(res)
        if res < tol:
            break
        if mixer is not None:
            mixed = mixer.update(rho.coeffs.ravel(), rho_new.coeffs.ravel())
            rho = FourierField(coeffs=mixed.reshape(rho.coeffs.shape), period=1.0)
        else:
            rho = rho + mixing * (rho_new - rho)
    else:
        raise ConvergenceError(
            f"periodic SCF did not reach {tol} in {max_iter} iterations "
            f"(last residual {residuals[-1]:.3e})", residuals)

    rho_fine = pad_field(rho_new, grid_n)
    state = CrystalState(config=config, fibers=fibers, occupations=occ,
                         density=rho_fine, electrons_per_cell=float(nuclear.Z))
    gap = check_gap(state, nuclear.Z)
    energy = state.kinetic_energy_per_cell() + 0.5 * d_periodic(
        rho_fine - mu, rho_fine - mu, zero_mode_c)

    # one extra map evaluation: residual of the *returned* density
    v_out = hartree_potential(rho_new - mu_c, zero_mode_c)
    fibers_out = _solve_fibers(bases, v_out, workers)
    occ_out = aufbau_fill(fibers_out, nuclear.Z, "count", degen_tol=degen_tol)
    sc_res = (density_from_fibers(fibers_out, occ_out, grid_c, config.lattice_constant) - rho_new).norm_l2()

    info = ScfInfo(iterations=len(residuals), residuals=residuals, converged=True,
                   self_consistency_residual=sc_res)
    return PeriodicSolution(state=state, gap=gap, energy=energy, info=info)


def periodic_energy(state: CrystalState, mu: FourierField, zero_mode_c: float = 0.0) -> float:
    """Energy per unit cell of an arbitrary periodic state."""
    return state.kinetic_energy_per_cell() + 0.5 * d_periodic(
        state.density - mu, state.density - mu, zero_mode_c)


# ---------------------------------------------------------------------------
# Contour projector and band paths
# ---------------------------------------------------------------------------

def contour_projector(fiber: BlochFiber, fermi_level: float,
                      n_nodes: int = 64, clearance: float = 1e-6) -> np.ndarray:
    """Spectral projector below the Fermi level by resolvent quadrature.

    Integrates ``(2*pi*i)^-1 (z - H)^-1`` over a rectangular contour whose
    right edge crosses the real axis at ``fermi_level``, using Gauss-Legendre
    nodes on each edge.  Fails if any eigenvalue sits within ``clearance``
    of the contour.
    """
    eigs = fiber.eigenvalues
    below = eigs[eigs < fermi_level]
    above = eigs[eigs > fermi_level]
    h0 = fiber.hamiltonian
    m = h0.shape[0]
    if below.size == 0:
        return np.zeros((m, m), dtype=complex)
    b = float(fermi_level)
    # scale the box to the gap clearance at the right edge and pad the left
    # by the same amount; every pole then sits at a distance comparable to
    # the half-length of its nearest edge and the per-edge Gauss rules
    # converge geometrically (spectra spanning many gap widths need more
    # nodes than the default)
    clear_r = b - float(below[-1])
    if above.size:
        clear_r = min(clear_r, float(above[0]) - b)
    span = float(below[-1] - below[0])
    half_h = clear_r + 0.25 * span
    a = float(below[0]) - clear_r

    dist = np.minimum(np.abs(eigs - a), np.abs(eigs - b))
    inside = (eigs > a) & (eigs < b)
    dist[inside] = np.minimum(dist[inside], half_h)
    if float(np.min(dist)) < clearance:
        raise IllConditionedError(
            f"eigenvalue within {clearance} of the integration contour"
        )

    corners = [a - 1j * half_h, b - 1j * half_h, b + 1j * half_h, a + 1j * half_h]
    per_edge = max(2, n_nodes // 4)
    t, w = np.polynomial.legendre.leggauss(per_edge)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    proj = np.zeros((m, m), dtype=complex)
    ident = np.eye(m, dtype=complex)
    for z0, z1 in zip(corners, corners[1:] + corners[:1]):
        dz = z1 - z0
        for ti, wi in zip(t, w):
            z = z0 + ti * dz
            proj += wi * dz * scipy.linalg.solve(z * ident - h0, ident)
    return proj / (2j * np.pi)


def band_path(config: LatticeConfig, v: FourierField, corners,
              n_per_segment: int = 12, n_bands: int | None = None):
    """Eigenvalues along a polyline in the Brillouin zone.

    ``corners`` are fractional coordinates (units of 2*pi/a); yields
    ``(kpoint, eigenvalues)`` pairs with ``n_per_segment`` points per leg.
    """
    corners = [np.asarray(c, dtype=float) * 2.0 * np.pi / config.lattice_constant
               for c in corners]
    rows = []
    for start, stop in zip(corners[:-1], corners[1:]):
        for i in range(n_per_segment):
            xi = start + (stop - start) * i / n_per_segment
            fiber = assemble_fiber(build_basis(config, xi), v)
            vals = fiber.eigenvalues if n_bands is None else fiber.eigenvalues[:n_bands]
            rows.append((xi, vals))
    fiber = assemble_fiber(build_basis(config, corners[-1]), v)
    vals = fiber.eigenvalues if n_bands is None else fiber.eigenvalues[:n_bands]
    rows.append((corners[-1], vals))
    return rows
