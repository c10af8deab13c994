"""Periodic and free-space Coulomb forms.

The L-periodic Green function of the Poisson equation with neutralising
background has Fourier coefficients ``4*pi / (|k|^2 L^3)`` for nonzero ``k``
on the ``(2*pi/L)Z^3`` mesh and a zero-mode constant ``c/L``.  The constant
fixes the additive gauge of the potential only; every neutral pairing is
independent of it, so the default policy is ``c = 0`` and the zero-mode
contribution is tracked separately wherever charged densities appear.
"""

from __future__ import annotations

import numpy as np

from .lattice import TWO_PI, FourierField, LatticeError, fourier_index_1d, ksq_table

FOUR_PI = 4.0 * np.pi


def g_coefficient(box_size: int, k, zero_mode_c: float = 0.0,
                  lattice_constant: float = 1.0) -> float:
    """Fourier coefficient of the box-periodic Coulomb kernel at wavevector k.

    The kernel with period ``P = a*L`` satisfies ``G_P(x) = P^-1 G_1(x/P)``;
    its coefficients are ``4*pi / (|k|^2 P^3)`` for nonzero k and ``c/P`` for
    k = 0.  k must lie on the reciprocal mesh ``(2*pi/P)Z^3``.
    """
    period = box_size * lattice_constant
    k = np.asarray(k, dtype=float)
    m = k * period / TWO_PI
    if np.max(np.abs(m - np.round(m))) > 1e-9:
        raise LatticeError(f"wavevector {k} is not on the (2*pi/{period})Z^3 mesh")
    ksq = float(k @ k)
    if ksq == 0.0:
        return zero_mode_c / period
    return FOUR_PI / (ksq * period**3)


def _kernel_coeffs(grid_n: int, box_size: float, zero_mode_c: float) -> np.ndarray:
    ksq = ksq_table(grid_n, box_size)
    g = np.empty_like(ksq)
    nz = ksq > 0
    g[nz] = FOUR_PI / (ksq[nz] * box_size**3)
    g[~nz] = zero_mode_c / box_size
    return g


def d_periodic_parts(f: FourierField, g: FourierField, zero_mode_c: float = 0.0):
    """Periodic Coulomb pairing split into (nonzero-mode, zero-mode) parts.

    The pairing is ``L^6 * sum_k Ghat_L(k) conj(fhat(k)) ghat(k)``, which is
    the double cell integral of ``G_L(x-y) f(x) g(y)``.
    """
    if f.grid_shape != g.grid_shape or f.period != g.period:
        raise LatticeError("d_periodic requires fields on the same period grid")
    L = f.period
    ksq = ksq_table(f.grid_shape[0], L)
    prod = np.conj(f.coeffs) * g.coeffs
    nz = ksq > 0
    main = L**6 * FOUR_PI / L**3 * float(np.real(np.sum(prod[nz] / ksq[nz])))
    zero = L**6 * (zero_mode_c / L) * float(np.real(prod[0, 0, 0]))
    return main, zero


def d_periodic(f: FourierField, g: FourierField, zero_mode_c: float = 0.0) -> float:
    """Bilinear form ``int int G_L(x-y) f(x) g(y) dx dy`` over the period cell."""
    main, zero = d_periodic_parts(f, g, zero_mode_c)
    return main + zero


def hartree_potential(rho: FourierField, zero_mode_c: float = 0.0) -> FourierField:
    """Periodic electrostatic potential ``rho * G_L`` (cell convolution).

    In Fourier space ``Vhat(k) = Ghat_L(k) * rhohat(k) * L^3``; solves
    ``-Delta V = 4*pi*(rho - mean rho)`` up to the zero-mode gauge constant.
    """
    L = rho.period
    gcoef = _kernel_coeffs(rho.grid_shape[0], L, zero_mode_c)
    return FourierField(coeffs=gcoef * rho.coeffs * L**3, period=L)


def estimate_zero_mode_constant(grid_n: int = 81) -> float:
    """Grid estimate of the constant fixing ``min G_1 = 0``.

    Evaluates the cutoff-truncated Fourier series of the unit kernel on an
    n^3 grid and returns ``-min``; the value is cutoff-dependent because the
    series of the singular kernel converges slowly (regularised estimate).
    """
    g = _kernel_coeffs(grid_n, 1.0, 0.0)
    vals = np.real(np.fft.ifftn(g) * g.size)
    return float(-np.min(vals))


# ---------------------------------------------------------------------------
# Free-space Coulomb energy of Gaussian charge mixtures.
# ---------------------------------------------------------------------------

def _mixture_ft(sites, k: np.ndarray) -> np.ndarray:
    """Continuum Fourier integral ``int f(x) exp(-i k.x) dx`` of a mixture.

    ``sites`` is an iterable of (center, amplitude, width) triples; each term
    contributes ``a * exp(-i k.c) * exp(-w^2 |k|^2 / 2)``.
    """
    out = np.zeros(k.shape[0], dtype=complex)
    ksq = np.einsum("ij,ij->i", k, k)
    for center, amplitude, width in sites:
        phase = k @ np.asarray(center, dtype=float)
        out += amplitude * np.exp(-1j * phase) * np.exp(-0.5 * width**2 * ksq)
    return out


def d_free(f_sites, g_sites, n_radial: int = 72, n_theta: int = 32,
           n_phi: int = 64, k_max: float | None = None) -> float:
    """Full-space Coulomb pairing ``4*pi int conj(fhat) ghat / |k|^2 dk``.

    Arguments are Gaussian-mixture site lists (center, amplitude, width);
    the integral uses Gauss-Legendre radial and product (Gauss-Legendre in
    cos(theta) x uniform azimuthal) angular quadrature.  Positive definite:
    ``d_free(f, f) > 0`` for nonzero f.
    """
    f_sites = list(f_sites)
    g_sites = list(g_sites)
    if not f_sites or not g_sites:
        return 0.0
    widths = [s[2] for s in f_sites] + [s[2] for s in g_sites]
    if min(widths) <= 0:
        raise LatticeError("Gaussian widths must be positive")
    if k_max is None:
        wf = min(s[2] for s in f_sites)
        wg = min(s[2] for s in g_sites)
        k_max = np.sqrt(80.0 / (wf * wf + wg * wg))

    r_nodes, r_w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * k_max * (r_nodes + 1.0)
    r_w = 0.5 * k_max * r_w
    u_nodes, u_w = np.polynomial.legendre.leggauss(n_theta)
    phi = TWO_PI * np.arange(n_phi) / n_phi
    phi_w = TWO_PI / n_phi

    sin_t = np.sqrt(1.0 - u_nodes**2)
    # unit sphere directions, shape (n_theta*n_phi, 3)
    dirs = np.stack([
        np.outer(sin_t, np.cos(phi)).ravel(),
        np.outer(sin_t, np.sin(phi)).ravel(),
        np.outer(u_nodes, np.ones(n_phi)).ravel(),
    ], axis=1)
    ang_w = np.outer(u_w, np.full(n_phi, phi_w)).ravel()

    total = 0.0
    for ri, wi in zip(r, r_w):
        k = ri * dirs
        fh = _mixture_ft(f_sites, k)
        gh = _mixture_ft(g_sites, k)
        # the r^2 of the measure cancels the 1/|k|^2 of the kernel
        total += wi * float(np.real(np.sum(ang_w * np.conj(fh) * gh)))
    # mixture_ft carries no (2*pi)^(-3/2) normalisation: 4*pi/(2*pi)^3 = 1/(2*pi^2)
    return total / (2.0 * np.pi**2)


def gaussian_interaction(f_sites, g_sites) -> float:
    """Closed-form free-space Coulomb pairing of two Gaussian mixtures.

    Two unit Gaussians of widths w1, w2 at distance d interact with energy
    ``erf(d / sqrt(2 (w1^2 + w2^2))) / d``, with limit
    ``sqrt(2 / (pi (w1^2 + w2^2)))`` at d = 0.
    """
    from scipy.special import erf

    total = 0.0
    for c1, a1, w1 in f_sites:
        for c2, a2, w2 in g_sites:
            d = float(np.linalg.norm(np.asarray(c1, float) - np.asarray(c2, float)))
            s = np.sqrt(2.0 * (w1**2 + w2**2))
            if d < 1e-14:
                total += a1 * a2 * np.sqrt(2.0 / (np.pi * (w1**2 + w2**2)))
            else:
                total += a1 * a2 * erf(d / s) / d
    return total


def periodic_potential_pairing(nu_sites, v_per: FourierField) -> float:
    """Integral ``int_R3 nu(x) V(x) dx`` of a mixture against a periodic field.

    Expands the cell-periodic potential in its Fourier series and pairs each
    mode with the continuum Fourier integral of the mixture (exact for the
    grid-truncated potential).
    """
    n = v_per.grid_shape[0]
    idx = fourier_index_1d(n)
    mm = np.array(np.meshgrid(idx, idx, idx, indexing="ij")).reshape(3, -1).T
    k = TWO_PI / v_per.period * mm.astype(float)
    # int nu V = sum_k Vhat(k) * int nu(x) exp(+i k.x) dx
    nu_ft = np.conj(_mixture_ft(list(nu_sites), k))
    return float(np.real(np.sum(v_per.coeffs.ravel() * nu_ft)))
