"""Plane-wave bases, periodic grids and Brillouin-zone meshes for the cubic lattice.

The unit cell is ``[-1/2, 1/2)^3`` with lattice constant 1, so the reciprocal
lattice is ``2*pi*Z^3`` and the first Brillouin zone is ``[-pi, pi)^3``.
Fields are stored by their Fourier coefficients with the convention

    f(x) = sum_k  fhat(k) exp(i k.x),

``k`` running over the reciprocal mesh ``(2*pi/period) * Z^3`` truncated to the
FFT grid.  All quantities are in Hartree atomic units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.fft

TWO_PI = 2.0 * np.pi


class LatticeError(ValueError):
    """Invalid lattice/basis parameters."""


def fourier_index_1d(n: int) -> np.ndarray:
    """Integer frequencies of an n-point FFT axis in FFT (wrapped) order."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(int)


def max_basis_index(cutoff: float, lattice_constant: float = 1.0) -> int:
    """Largest integer coordinate of a reciprocal vector admitted at any k-point.

    A vector ``k = (2*pi/a)*m`` enters the basis at ``xi`` when
    ``|xi + k|^2 / 2 <= cutoff``; the worst case over ``xi`` in the Brillouin
    zone shifts each coordinate by at most ``pi/a``.
    """
    b = TWO_PI / lattice_constant
    return int(np.floor((np.sqrt(2.0 * cutoff) + 0.5 * b) / b))


@dataclass(frozen=True)
class LatticeConfig:
    """Discretisation of the unit-cell problem.

    Parameters
    ----------
    cutoff : float
        Kinetic cutoff in Hartree; the basis at ``xi`` holds all reciprocal
        vectors ``k`` with ``|xi + k|^2 / 2 <= cutoff``.
    bz_size : int
        Brillouin-zone mesh parameter L; the mesh is ``(2*pi/(aL))Z^3`` cut
        to the Brillouin zone and has exactly ``L^3`` points.
    grid_n : int
        Odd FFT grid side per unit cell; must resolve every admitted wave.
    lattice_constant : float
        Cubic cell edge a in Bohr.  Default 1 (the dense reference setting);
        insulating fixtures need a > 1, where the Coulomb scale wins over
        the kinetic shell scale ``(2*pi/a)^2/2``.
    """

    cutoff: float
    bz_size: int
    grid_n: int
    lattice_constant: float = 1.0

    def __post_init__(self):
        if self.cutoff <= 0:
            raise LatticeError(f"cutoff must be positive, got {self.cutoff}")
        if self.bz_size < 1:
            raise LatticeError(f"bz_size must be >= 1, got {self.bz_size}")
        if self.grid_n % 2 == 0:
            raise LatticeError(f"grid_n must be odd, got {self.grid_n}")
        if self.lattice_constant <= 0:
            raise LatticeError(f"lattice_constant must be positive, got {self.lattice_constant}")
        kmax = max_basis_index(self.cutoff, self.lattice_constant)
        if self.grid_n < 2 * kmax + 1:
            raise LatticeError(
                f"grid_n={self.grid_n} cannot represent basis indices up to "
                f"{kmax}; need at least {2 * kmax + 1}"
            )

    @property
    def cell_volume(self) -> float:
        return self.lattice_constant**3


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Ordered plane-wave basis of one Bloch fiber.

    ``gvectors[i] = 2*pi*indices[i]`` and the waves are sorted by
    ``|kpoint + g|^2`` with lexicographic index tie-break, so eigensolver
    output is reproducible.
    """

    kpoint: np.ndarray
    indices: np.ndarray      # (m, 3) integer reciprocal coordinates
    gvectors: np.ndarray     # (m, 3) floats, 2*pi*indices

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    @property
    def kinetic(self) -> np.ndarray:
        """Kinetic energies |xi + g|^2 / 2 of the basis waves."""
        q = self.kpoint[None, :] + self.gvectors
        return 0.5 * np.einsum("ij,ij->i", q, q)


def brillouin_mesh(bz_size: int, lattice_constant: float = 1.0) -> np.ndarray:
    """All points of ``(2*pi/(aL))Z^3`` inside the Brillouin zone.

    Returns an ``(L^3, 3)`` array in lexicographic order; L=1 gives the
    Gamma point only.
    """
    if bz_size < 1:
        raise LatticeError(f"bz_size must be >= 1, got {bz_size}")
    lo = -(bz_size // 2)
    axis = np.arange(lo, lo + bz_size)
    pts = np.array(list(product(axis, axis, axis)), dtype=float)
    return TWO_PI / (bz_size * lattice_constant) * pts


def build_basis(config: LatticeConfig, kpoint) -> PlaneWaveBasis:
    """Plane waves ``(2*pi/a)*m`` with ``|kpoint + (2*pi/a)*m|^2/2 <= cutoff``."""
    if config.cutoff <= 0:
        raise LatticeError(f"cutoff must be positive, got {config.cutoff}")
    kpoint = np.asarray(kpoint, dtype=float)
    b = TWO_PI / config.lattice_constant
    bound = int(np.floor((np.sqrt(2.0 * config.cutoff) + np.linalg.norm(kpoint)) / b)) + 1
    rng = np.arange(-bound, bound + 1)
    mm = np.array(np.meshgrid(rng, rng, rng, indexing="ij")).reshape(3, -1).T
    q = kpoint[None, :] + b * mm
    ke = 0.5 * np.einsum("ij,ij->i", q, q)
    keep = ke <= config.cutoff + 1e-12
    mm, ke = mm[keep], ke[keep]
    order = np.lexsort((mm[:, 2], mm[:, 1], mm[:, 0], np.round(ke, 12)))
    mm = mm[order]
    return PlaneWaveBasis(kpoint=kpoint, indices=mm, gvectors=b * mm.astype(float))


def build_supercell_basis(cutoff: float, box_size: int,
                          lattice_constant: float = 1.0) -> PlaneWaveBasis:
    """Plane waves ``(2*pi/(aL))*m`` of the L-cell with ``|k|^2/2 <= cutoff``.

    Equivalent to the union over the L^3 Brillouin mesh of the unit-cell
    fiber bases (every vector of ``(2*pi/(aL))Z^3`` splits uniquely as
    ``xi + (2*pi/a)*m`` with ``xi`` on the mesh).
    """
    if cutoff <= 0:
        raise LatticeError(f"cutoff must be positive, got {cutoff}")
    b = TWO_PI / (box_size * lattice_constant)
    bound = int(np.floor(np.sqrt(2.0 * cutoff) / b)) + 1
    rng = np.arange(-bound, bound + 1)
    mm = np.array(np.meshgrid(rng, rng, rng, indexing="ij")).reshape(3, -1).T
    k = b * mm
    ke = 0.5 * np.einsum("ij,ij->i", k, k)
    keep = ke <= cutoff + 1e-12
    mm, ke = mm[keep], ke[keep]
    order = np.lexsort((mm[:, 2], mm[:, 1], mm[:, 0], np.round(ke, 12)))
    mm = mm[order]
    return PlaneWaveBasis(kpoint=np.zeros(3), indices=mm, gvectors=b * mm.astype(float))


@dataclass(frozen=True)
class FourierField:
    """Periodic scalar field stored by its Fourier coefficients.

    ``coeffs`` is an ``(n, n, n)`` complex array in FFT index order; entry at
    integer frequency ``m`` is the coefficient of ``exp(i*(2*pi/period)*m.x)``.
    The period is 1 for unit-cell fields and L for supercell fields.
    """

    coeffs: np.ndarray
    period: float

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    @property
    def grid_shape(self):
        return self.coeffs.shape

    @property
    def volume(self) -> float:
        return float(self.period) ** 3

    def real_space(self) -> np.ndarray:
        """Samples f(x_j) on the uniform grid, x_j = j*period/n per axis."""
        n_total = self.coeffs.size
        return np.real(scipy.fft.ifftn(np.asarray(self.coeffs)) * n_total)

    def zero_mode(self) -> float:
        return float(np.real(self.coeffs[0, 0, 0]))

    def integral(self) -> float:
        """Integral of the field over one period cell."""
        return self.zero_mode() * self.volume

    def norm_l2(self) -> float:
        """L^2 norm over one period cell (Parseval)."""
        return float(np.sqrt(self.volume) * np.linalg.norm(self.coeffs))

    def translated(self, shift) -> "FourierField":
        """Field translated by a vector: multiplication by exp(-i k.shift)."""
        shift = np.asarray(shift, dtype=float)
        n = self.grid_shape[0]
        freq = TWO_PI / self.period * fourier_index_1d(n)
        phase = np.exp(-1j * (
            freq[:, None, None] * shift[0]
            + freq[None, :, None] * shift[1]
            + freq[None, None, :] * shift[2]
        ))
        return FourierField(coeffs=self.coeffs * phase, period=self.period)

    def __add__(self, other: "FourierField") -> "FourierField":
        _check_compatible(self, other)
        return FourierField(self.coeffs + other.coeffs, self.period)

    def __sub__(self, other: "FourierField") -> "FourierField":
        _check_compatible(self, other)
        return FourierField(self.coeffs - other.coeffs, self.period)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.coeffs * scalar, self.period)

    __rmul__ = __mul__


def _check_compatible(a: FourierField, b: FourierField):
    if a.grid_shape != b.grid_shape or a.period != b.period:
        raise LatticeError(
            f"incompatible fields: shapes {a.grid_shape}/{b.grid_shape}, "
            f"periods {a.period}/{b.period}"
        )


def field_from_real(samples: np.ndarray, period: float) -> FourierField:
    """Build a field from real-space samples on the uniform period grid."""
    samples = np.asarray(samples)
    if np.iscomplexobj(samples) and np.max(np.abs(samples.imag)) > 1e-12 * max(1.0, np.max(np.abs(samples))):
        raise LatticeError("field samples must be real")
    coeffs = scipy.fft.fftn(np.real(samples).astype(float)) / samples.size
    return FourierField(coeffs=coeffs, period=float(period))


def zero_field(grid_n: int, period: float) -> FourierField:
    return FourierField(coeffs=np.zeros((grid_n,) * 3, dtype=complex), period=float(period))


def ksq_table(grid_n: int, period: float) -> np.ndarray:
    """|k|^2 on the FFT grid of an n-point period cell."""
    freq = TWO_PI / period * fourier_index_1d(grid_n)
    fx = freq[:, None, None]
    fy = freq[None, :, None]
    fz = freq[None, None, :]
    return fx**2 + fy**2 + fz**2


def grid_coordinates(grid_n: int, period: float, centered: bool = True) -> np.ndarray:
    """Grid point coordinates, shape (n, n, n, 3).

    With ``centered=True`` coordinates are wrapped to ``[-period/2, period/2)``
    so they lie in the canonical cell.
    """
    h = period / grid_n
    axis = h * np.arange(grid_n)
    if centered:
        axis = np.where(axis >= period / 2, axis - period, axis)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([x, y, z], axis=-1)


def embed_unit_field(unit: FourierField, box_size: int) -> FourierField:
    """Reinterpret a cell-periodic field on the L-cell grid.

    Unit-cell coefficients at integer frequency ``m`` map to L-cell
    frequency ``L*m``; all other coefficients vanish.
    """
    n = unit.grid_shape[0]
    L = int(box_size)
    nl = n * L
    out = np.zeros((nl,) * 3, dtype=complex)
    idx = fourier_index_1d(n) * L
    pos = np.mod(idx, nl)
    out[np.ix_(pos, pos, pos)] = unit.coeffs
    return FourierField(coeffs=out, period=unit.period * L)


def fold_to_unit_cell(fld: FourierField, grid_n: int) -> FourierField:
    """Cell-periodic part of an L-cell field on the unit-cell grid.

    Keeps the coefficients at frequencies that are multiples of L, which
    equals averaging the field over the L^3 unit-cell translations.
    """
    nl = fld.grid_shape[0]
    if nl % grid_n != 0:
        raise LatticeError(f"L-cell grid {nl} is not a multiple of {grid_n}")
    L = nl // grid_n
    idx = fourier_index_1d(grid_n) * L
    pos = np.mod(idx, nl)
    sub = fld.coeffs[np.ix_(pos, pos, pos)]
    return FourierField(coeffs=sub.copy(), period=fld.period / L)


def periodize_defect(samples: np.ndarray, box_size: int,
                     lattice_constant: float = 1.0) -> FourierField:
    """L-periodic field equal to the given samples on the L-cell.

    The input is the restriction of a density to the box ``[-aL/2, aL/2)^3``
    sampled on the uniform grid; treating the samples as periodic data
    realises the wrap-around sum over box translates of the truncated
    density.
    """
    return field_from_real(samples, period=float(box_size * lattice_constant))


def restrict_field(fld: FourierField, grid_n: int) -> FourierField:
    """Drop Fourier coefficients beyond the Nyquist range of a smaller grid.

    Selecting coefficients by integer frequency is an exact restriction of
    the field to the retained modes (no resampling, no aliasing).
    """
    n_old = fld.grid_shape[0]
    if grid_n == n_old:
        return fld
    if grid_n > n_old:
        raise LatticeError(f"restriction target {grid_n} exceeds the grid {n_old}")
    idx = fourier_index_1d(grid_n)
    pos = np.mod(idx, n_old)
    sub = fld.coeffs[np.ix_(pos, pos, pos)]
    return FourierField(coeffs=sub.copy(), period=fld.period)


def pad_field(fld: FourierField, grid_n: int) -> FourierField:
    """Embed a field's coefficients into a larger grid (exact zero padding)."""
    n_old = fld.grid_shape[0]
    if grid_n == n_old:
        return fld
    if grid_n < n_old:
        raise LatticeError(f"padding target {grid_n} is below the grid {n_old}")
    out = np.zeros((grid_n,) * 3, dtype=complex)
    idx = fourier_index_1d(n_old)
    pos = np.mod(idx, grid_n)
    out[np.ix_(pos, pos, pos)] = fld.coeffs
    return FourierField(coeffs=out, period=fld.period)


def scf_grid_size(config: LatticeConfig, max_box: int = 12) -> int:
    """Smallest odd per-cell grid that holds all SCF-loop fields exactly.

    Orbital products have at most twice the basis bandwidth, so a per-cell
    side of ``4*r + 1`` (r the basis index radius) makes the density update
    and the potential lookup alias-free for every box size up to
    ``max_box``; the loop on this grid reproduces the fine-grid fixed point
    coefficient for coefficient.
    """
    r1 = np.sqrt(2.0 * config.cutoff) * config.lattice_constant / TWO_PI
    need = 4 * max_basis_index(config.cutoff, config.lattice_constant) + 1
    for box in range(1, max_box + 1):
        r_box = int(np.floor(r1 * box + 1e-12))
        need = max(need, int(np.ceil((4 * r_box + 1) / box)))
    if need % 2 == 0:
        need += 1
    return min(need, config.grid_n)
