"""Brute-force reference implementations used only by the test suite.

Everything here is deliberately slow and simple, and shares no kernel code
with the production modules: Hamiltonians are finite-difference matrices on
real-space grids, Coulomb pairings are direct double sums against a kernel
table built by explicit per-axis phase contractions, and the projector
identities are checked with plain dense algebra.  Only numpy is imported.
"""

from __future__ import annotations

import numpy as np

_MAX_FD_GRID = 13
_MAX_COULOMB_GRID = 60


def _fd_stencils(n: int, spacing: float, order: int):
    """Periodic first/second derivative matrices (central differences)."""
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    idx = np.arange(n)
    if order == 2:
        d1[idx, (idx + 1) % n] = 1.0 / (2 * spacing)
        d1[idx, (idx - 1) % n] = -1.0 / (2 * spacing)
        d2[idx, idx] = -2.0 / spacing**2
        d2[idx, (idx + 1) % n] = 1.0 / spacing**2
        d2[idx, (idx - 1) % n] = 1.0 / spacing**2
    elif order == 4:
        c1 = np.array([1.0, -8.0, 8.0, -1.0]) / (12 * spacing)
        for shift, coef in zip((-2, -1, 1, 2), c1):
            d1[idx, (idx + shift) % n] = coef
        c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * spacing**2)
        for shift, coef in zip((-2, -1, 0, 1, 2), c2):
            d2[idx, (idx + shift) % n] += coef
    else:
        raise ValueError(f"unsupported stencil order {order}")
    return d1, d2


def oracle_eigensolve(v_samples: np.ndarray, kpoint, lattice_constant: float = 1.0,
                      order: int = 4, n_bands: int | None = None) -> np.ndarray:
    """Finite-difference spectrum of ``(-i grad + k)^2/2 + V`` on the cell.

    ``v_samples`` are real potential values on an n^3 periodic grid with
    n <= 13 (the oracle refuses larger grids: it exists to cross-check the
    plane-wave path, not to compete with it).
    """
    v_samples = np.asarray(v_samples, dtype=float)
    n = v_samples.shape[0]
    if v_samples.shape != (n, n, n):
        raise ValueError("potential samples must form a cubic grid")
    if n > _MAX_FD_GRID:
        raise ValueError(f"oracle grid {n} exceeds the limit {_MAX_FD_GRID}")
    kpoint = np.asarray(kpoint, dtype=float)
    h = lattice_constant / n
    d1, d2 = _fd_stencils(n, h, order)
    eye = np.eye(n)

    def kron3(a, b, c):
        return np.kron(np.kron(a, b), c)

    lap = kron3(d2, eye, eye) + kron3(eye, d2, eye) + kron3(eye, eye, d2)
    grad = [kron3(d1, eye, eye), kron3(eye, d1, eye), kron3(eye, eye, d1)]
    ham = -0.5 * lap.astype(complex)
    for kc, g in zip(kpoint, grad):
        ham += -1j * kc * g
    ham += 0.5 * float(kpoint @ kpoint) * np.eye(n**3)
    ham += np.diag(v_samples.ravel())
    vals = np.linalg.eigvalsh(ham)
    return vals if n_bands is None else vals[:n_bands]


def _kernel_table(n: int, box_size: int, zero_mode_c: float,
                  lattice_constant: float = 1.0) -> np.ndarray:
    """Values of the periodic Coulomb kernel on the grid of point differences.

    The truncated Fourier series is summed by explicit per-axis phase
    contractions (a hand-rolled slow transform; no FFT involved).
    """
    period = box_size * lattice_constant
    freq_idx = np.where(np.arange(n) <= n // 2, np.arange(n), np.arange(n) - n)
    k1 = 2.0 * np.pi / period * freq_idx
    ksq = (k1[:, None, None]**2 + k1[None, :, None]**2 + k1[None, None, :]**2)
    coef = np.empty_like(ksq)
    nz = ksq > 0
    coef[nz] = 4.0 * np.pi / (ksq[nz] * period**3)
    coef[~nz] = zero_mode_c / period
    # e^{i k x} on grid points x_j = j*period/n: phase 2*pi*m*j/n per axis
    phases = np.exp(2j * np.pi * np.outer(freq_idx, np.arange(n)) / n)
    t1 = np.einsum("abc,ax->xbc", coef.astype(complex), phases)
    t2 = np.einsum("xbc,by->xyc", t1, phases)
    t3 = np.einsum("xyc,cz->xyz", t2, phases)
    return np.real(t3)


def oracle_coulomb(f_samples: np.ndarray, g_samples: np.ndarray, box_size: int,
                   zero_mode_c: float = 0.0, lattice_constant: float = 1.0,
                   chunk: int = 256) -> float:
    """Direct double-sum quadrature of the periodic Coulomb pairing.

    ``h^6 * sum_ij G(x_i - x_j) f(x_i) g(x_j)`` with the kernel evaluated by
    its truncated Fourier series on the difference grid.
    """
    f_samples = np.asarray(f_samples, dtype=float)
    g_samples = np.asarray(g_samples, dtype=float)
    n = f_samples.shape[0]
    if f_samples.shape != g_samples.shape:
        raise ValueError("fields must share a grid")
    if n > _MAX_COULOMB_GRID:
        raise ValueError(f"oracle grid {n} exceeds the limit {_MAX_COULOMB_GRID}")
    period = box_size * lattice_constant
    h = period / n
    table = _kernel_table(n, box_size, zero_mode_c, lattice_constant)
    fr = f_samples.ravel()
    gr = g_samples.ravel()
    axes = np.arange(n)
    ix, iy, iz = [arr.ravel() for arr in np.meshgrid(axes, axes, axes, indexing="ij")]
    total = 0.0
    npts = n**3
    for s in range(0, npts, chunk):
        sl = slice(s, min(s + chunk, npts))
        dx = np.mod(ix[sl][:, None] - ix[None, :], n)
        dy = np.mod(iy[sl][:, None] - iy[None, :], n)
        dz = np.mod(iz[sl][:, None] - iz[None, :], n)
        rows = table[dx, dy, dz]
        total += float(fr[sl] @ (rows @ gr))
    return total * h**6


def _random_projector_pair(n: int, n_occ: int, rng: np.random.Generator,
                           n_rotations: int):
    """Reference projector and a rotated copy acting on C^n."""
    gamma0 = np.zeros((n, n), dtype=complex)
    gamma0[np.arange(n_occ), np.arange(n_occ)] = 1.0
    u = np.eye(n, dtype=complex)
    for _ in range(n_rotations):
        i = int(rng.integers(0, n_occ))
        a = int(rng.integers(n_occ, n))
        theta = rng.uniform(0.1, 1.3)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        g = np.eye(n, dtype=complex)
        g[i, i] = np.cos(theta)
        g[a, a] = np.cos(theta)
        g[i, a] = -np.conj(phase) * np.sin(theta)
        g[a, i] = phase * np.sin(theta)
        u = g @ u
    p = u @ gamma0 @ u.conj().T
    return gamma0, p


def oracle_projector_identities(n: int = 12, n_occ: int = 4, seed: int = 0,
                                n_rotations: int = 5, t_mix: float = 0.5) -> dict:
    """Dense-algebra checks of the defect-state block identities.

    For projector differences ``Q = P - gamma0`` the identity
    ``Q^2 = Q++ - Q--`` holds exactly and the trace is an integer; convex
    combinations satisfy ``Q^2 <= Q++ - Q--``.  Returns the measured
    residuals of all three statements.
    """
    rng = np.random.default_rng(seed)
    gamma0, p1 = _random_projector_pair(n, n_occ, rng, n_rotations)
    _, p2 = _random_projector_pair(n, n_occ, rng, n_rotations)
    comp = np.eye(n) - gamma0

    def blocks(q):
        return comp @ q @ comp, gamma0 @ q @ gamma0

    q1 = p1 - gamma0
    qpp, qmm = blocks(q1)
    proj_residual = float(np.max(np.abs(q1 @ q1 - (qpp - qmm))))
    trace = float(np.real(np.trace(q1)))
    trace_residual = abs(trace - round(trace))

    qmix = t_mix * q1 + (1 - t_mix) * (p2 - gamma0)
    qpp_m, qmm_m = blocks(qmix)
    resid = qpp_m - qmm_m - qmix @ qmix
    convex_min_eig = float(np.linalg.eigvalsh((resid + resid.conj().T) / 2)[0])
    return {
        "projector_identity_residual": proj_residual,
        "trace": trace,
        "trace_integrality_residual": trace_residual,
        "convex_min_eigenvalue": convex_min_eig,
    }
