"""Nuclear and defect charge distributions as analytic Gaussian mixtures.

The host crystal carries one smeared nucleus of charge Z per unit cell; the
defect is a finite mixture of Gaussians anywhere in the supercell.  Supplying
densities analytically keeps total charges exact by construction: the
zero-mode coefficient of the periodised nuclear density is Z itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    FourierField,
    LatticeConfig,
    LatticeError,
    fourier_index_1d,
    grid_coordinates,
    ksq_table,
    periodize_defect,
)


@dataclass(frozen=True)
class NuclearModel:
    """One smeared nucleus of integer charge Z per unit cell.

    ``form='gaussian'`` places a normalised Gaussian of width ``sigma`` at
    each lattice point; ``form='uniform'`` spreads the charge uniformly
    (not a physical nucleus, but it makes the mean-field Hamiltonian the
    free Laplacian, an exactly solvable reference).
    """

    Z: int
    sigma: float = 0.1
    form: str = "gaussian"

    def __post_init__(self):
        if self.Z < 1:
            raise LatticeError(f"nuclear charge Z must be a positive integer, got {self.Z}")
        if self.form not in ("gaussian", "uniform"):
            raise LatticeError(f"unknown nuclear form {self.form!r}")
        if self.form == "gaussian" and self.sigma <= 0:
            raise LatticeError(f"nuclear sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class DefectSite:
    center: tuple
    amplitude: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise LatticeError(f"defect width must be positive, got {self.width}")
        if len(self.center) != 3:
            raise LatticeError("defect center must be a 3-vector")


@dataclass(frozen=True)
class DefectCharge:
    """Local defect density: a finite Gaussian mixture (L^1 and L^2 by construction)."""

    sites: tuple

    @staticmethod
    def from_lists(entries) -> "DefectCharge":
        return DefectCharge(sites=tuple(
            DefectSite(center=tuple(float(c) for c in e["center"]),
                       amplitude=float(e["amplitude"]),
                       width=float(e["width"]))
            for e in entries
        ))

    @property
    def total_charge(self) -> float:
        return float(sum(s.amplitude for s in self.sites))

    def site_tuples(self):
        """(center, amplitude, width) triples for the Coulomb quadratures."""
        return [(np.asarray(s.center, float), s.amplitude, s.width) for s in self.sites]

    def scaled(self, factor: float) -> "DefectCharge":
        return DefectCharge(sites=tuple(
            DefectSite(s.center, factor * s.amplitude, s.width) for s in self.sites
        ))


def mu_field(model: NuclearModel, config: LatticeConfig) -> FourierField:
    """Lattice-periodic nuclear density on the unit-cell grid.

    Gaussian form has exact Fourier coefficients ``Z * exp(-sigma^2 |k|^2/2)``
    on the reciprocal grid (so the cell integral is Z exactly); uniform form
    spreads the charge evenly over the cell.
    """
    n = config.grid_n
    a = config.lattice_constant
    coeffs = np.zeros((n,) * 3, dtype=complex)
    if model.form == "uniform":
        coeffs[0, 0, 0] = model.Z / a**3
    else:
        ksq = ksq_table(n, a)
        coeffs[...] = model.Z / a**3 * np.exp(-0.5 * model.sigma**2 * ksq)
    return FourierField(coeffs=coeffs, period=a)


def mu_field_supercell(model: NuclearModel, config: LatticeConfig, box_size: int) -> FourierField:
    """The same lattice-periodic nuclear density seen on the L-cell grid.

    A cell-periodic function has L-cell coefficients supported on frequencies
    that are multiples of L, equal to the unit-cell coefficients there.
    """
    L = int(box_size)
    n = config.grid_n
    nl = n * L
    unit = mu_field(model, config)
    out = np.zeros((nl,) * 3, dtype=complex)
    pos = np.mod(fourier_index_1d(n) * L, nl)
    out[np.ix_(pos, pos, pos)] = unit.coeffs
    return FourierField(coeffs=out, period=unit.period * L)


def nu_field(defect: DefectCharge, box_size: int, config: LatticeConfig) -> FourierField:
    """Box-periodised defect density on the L-cell grid.

    The analytic mixture is sampled on the box ``[-aL/2, aL/2)^3`` (every
    site center must lie inside) and the truncated samples are periodised;
    the integral over the box equals the total mixture charge up to the
    Gaussian tails outside the box.
    """
    L = int(box_size)
    a = config.lattice_constant
    half = a * L / 2
    if not defect.sites:
        n = config.grid_n * L
        return FourierField(coeffs=np.zeros((n,) * 3, dtype=complex), period=a * L)
    for s in defect.sites:
        c = np.asarray(s.center, dtype=float)
        if np.any(c < -half) or np.any(c >= half):
            raise LatticeError(f"defect site {s.center} lies outside the box of size {a * L}")
    coords = grid_coordinates(config.grid_n * L, a * L, centered=True)
    samples = np.zeros(coords.shape[:3])
    for c, amp, w in defect.site_tuples():
        diff = coords - c[None, None, None, :]
        rsq = np.einsum("...i,...i->...", diff, diff)
        samples += amp * (2.0 * np.pi * w**2) ** (-1.5) * np.exp(-0.5 * rsq / w**2)
    return periodize_defect(samples, L, a)
