import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermisea.coulomb import (
    d_free,
    d_periodic,
    d_periodic_parts,
    estimate_zero_mode_constant,
    g_coefficient,
    gaussian_interaction,
    hartree_potential,
    periodic_potential_pairing,
)
from fermisea.lattice import (
    FourierField,
    LatticeError,
    field_from_real,
    field_from_real as ffr,
    ksq_table,
)

TWO_PI = 2 * np.pi


def cos_field(n=9, period=1.0, axis=0):
    x = np.arange(n) / n * period
    shape = [1, 1, 1]
    shape[axis] = n
    wave = np.cos(TWO_PI / period * x).reshape(shape)
    return field_from_real(wave * np.ones((n, n, n)), period)


class TestKernelCoefficients:
    def test_unit_cell_first_shell(self):
        val = g_coefficient(1, [TWO_PI, 0, 0])
        np.testing.assert_allclose(val, 1 / np.pi, rtol=1e-14)

    def test_box_two_first_shell(self):
        val = g_coefficient(2, [np.pi, 0, 0])
        np.testing.assert_allclose(val, 1 / (2 * np.pi), rtol=1e-14)

    def test_zero_mode_policy(self):
        assert g_coefficient(1, [0, 0, 0]) == 0.0
        assert g_coefficient(2, [0, 0, 0], zero_mode_c=0.5) == 0.25

    def test_off_mesh_rejected(self):
        with pytest.raises(LatticeError):
            g_coefficient(2, [1.0, 0, 0])

    def test_scaling_identity(self):
        # G_L(x) = G_1(x/L)/L in Fourier: Ghat_L(k) = Ghat_1(L k)/L
        k = np.array([TWO_PI / 3, 0, 0])
        np.testing.assert_allclose(g_coefficient(3, k),
                                   g_coefficient(1, k * 3) / 3,
                                   rtol=1e-14)

    def test_all_coefficients_positive(self):
        ksq = ksq_table(9, 1.0)
        assert np.all(4 * np.pi / ksq[ksq > 0] > 0)


class TestPeriodicPairing:
    def test_cosine_value(self):
        f = cos_field()
        np.testing.assert_allclose(d_periodic(f, f), 1 / (2 * np.pi), rtol=1e-12)

    def test_symmetric_and_bilinear(self, rng):
        f = ffr(rng.standard_normal((9, 9, 9)), 1.0)
        g = ffr(rng.standard_normal((9, 9, 9)), 1.0)
        h = ffr(rng.standard_normal((9, 9, 9)), 1.0)
        np.testing.assert_allclose(d_periodic(f, g), d_periodic(g, f), rtol=1e-12)
        lhs = d_periodic(f, 2.0 * g + h)
        rhs = 2.0 * d_periodic(f, g) + d_periodic(f, h)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-11)

    def test_neutral_input_ignores_zero_mode(self, rng):
        samples = rng.standard_normal((9, 9, 9))
        samples -= samples.mean()
        f = ffr(samples, 1.0)
        g = ffr(rng.standard_normal((9, 9, 9)), 1.0)
        vals = [d_periodic(f, g, zero_mode_c=c) for c in (0.0, 1.0, 17.3)]
        assert max(vals) - min(vals) <= 1e-14 * max(1.0, abs(vals[0]))

    def test_positive_definite_on_neutral_fields(self, rng):
        for _ in range(5):
            samples = rng.standard_normal((9, 9, 9))
            samples -= samples.mean()
            f = ffr(samples, 1.0)
            assert d_periodic(f, f) > 0

    def test_zero_mode_reported_separately(self):
        coeffs = np.zeros((5, 5, 5), dtype=complex)
        coeffs[0, 0, 0] = 2.0
        f = FourierField(coeffs=coeffs, period=1.0)
        main, zero = d_periodic_parts(f, f, zero_mode_c=0.7)
        assert main == 0.0
        np.testing.assert_allclose(zero, 0.7 * 4.0)

    def test_scaling_law_for_dilated_fields(self, rng):
        # D_{G_L}(f_L, f_L) = L^{-1} D_{G_1}(f, f) for f_L(x) = L^{-3} f(x/L)
        n, L = 9, 3
        samples = rng.standard_normal((n, n, n))
        samples -= samples.mean()
        f1 = ffr(samples, 1.0)
        fL = FourierField(coeffs=f1.coeffs / L**3, period=float(L))
        np.testing.assert_allclose(d_periodic(fL, fL), d_periodic(f1, f1) / L,
                                   rtol=1e-10)

    def test_period_mismatch_rejected(self, rng):
        with pytest.raises(LatticeError):
            d_periodic(ffr(rng.standard_normal((9,) * 3), 1.0),
                       ffr(rng.standard_normal((9,) * 3), 2.0))


class TestHartreePotential:
    def test_single_mode(self):
        f = cos_field()
        v = hartree_potential(f)
        expected = cos_field().real_space() / np.pi
        np.testing.assert_allclose(v.real_space(), expected, atol=1e-13)

    def test_zero_density(self):
        v = hartree_potential(FourierField(np.zeros((5, 5, 5), complex), 1.0))
        assert v.norm_l2() == 0.0

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_poisson_equation(self, seed):
        rng = np.random.default_rng(seed)
        samples = rng.standard_normal((9, 9, 9))
        rho = field_from_real(samples, 1.0)
        v = hartree_potential(rho)
        lap = FourierField(coeffs=-ksq_table(9, 1.0) * v.coeffs, period=1.0)
        target = 4 * np.pi * (samples - samples.mean())
        np.testing.assert_allclose(-lap.real_space(), target, atol=1e-10 * (1 + np.max(np.abs(target))))

    def test_box_period_poisson(self, rng):
        samples = rng.standard_normal((12, 12, 12))
        rho = field_from_real(samples, 3.0)
        v = hartree_potential(rho)
        lap = FourierField(coeffs=-ksq_table(12, 3.0) * v.coeffs, period=3.0)
        target = 4 * np.pi * (samples - samples.mean())
        np.testing.assert_allclose(-lap.real_space(), target, atol=1e-10 * (1 + np.max(np.abs(target))))


class TestFreeSpacePairing:
    def test_normalised_gaussian_self_energy(self):
        sites = [((0.0, 0.0, 0.0), 1.0, 0.1)]
        value = d_free(sites, sites)
        np.testing.assert_allclose(value, 1 / (0.1 * np.sqrt(np.pi)), rtol=1e-10)

    def test_empty_mixture(self):
        assert d_free([], [((0, 0, 0), 1.0, 0.1)]) == 0.0

    def test_far_pair_looks_like_point_charges(self):
        a = [((0.0, 0.0, 0.0), 1.0, 0.05)]
        b = [((0.4, 0.0, 0.0), 1.0, 0.05)]
        np.testing.assert_allclose(d_free(a, b), 2.5, atol=1e-4)

    def test_quadrature_matches_closed_form(self, rng):
        sites_a = [((0.3, -0.2, 0.1), 0.7, 0.12), ((-0.1, 0.25, 0.0), -0.4, 0.2)]
        sites_b = [((0.0, 0.1, -0.3), 1.1, 0.15)]
        np.testing.assert_allclose(d_free(sites_a, sites_b),
                                   gaussian_interaction(sites_a, sites_b),
                                   rtol=1e-8, atol=1e-10)

    def test_positive_definite(self):
        sites = [((0.2, 0.0, 0.0), 1.0, 0.1), ((-0.2, 0.0, 0.0), -0.8, 0.15)]
        assert d_free(sites, sites) > 0

    def test_invalid_width(self):
        with pytest.raises(LatticeError):
            d_free([((0, 0, 0), 1.0, 0.0)], [((0, 0, 0), 1.0, 0.1)])


class TestPeriodicPotentialPairing:
    def test_constant_potential_integrates_charge(self):
        coeffs = np.zeros((9, 9, 9), dtype=complex)
        coeffs[0, 0, 0] = 2.5
        v = FourierField(coeffs=coeffs, period=1.0)
        sites = [((0.1, 0.0, 0.0), 0.8, 0.05)]
        np.testing.assert_allclose(periodic_potential_pairing(sites, v), 2.0,
                                   rtol=1e-12)

    def test_single_mode_against_quadrature(self):
        n = 21
        coeffs = np.zeros((n, n, n), dtype=complex)
        coeffs[1, 0, 0] = 0.5
        coeffs[-1, 0, 0] = 0.5
        v = FourierField(coeffs=coeffs, period=1.0)   # cos(2 pi x)
        w = 0.08
        sites = [((0.13, 0.0, 0.0), 1.0, w)]
        # closed form: int g(x) cos(2 pi x) dx = cos(2 pi c) exp(-w^2 (2 pi)^2/2)
        expected = np.cos(TWO_PI * 0.13) * np.exp(-0.5 * w**2 * TWO_PI**2)
        np.testing.assert_allclose(periodic_potential_pairing(sites, v), expected,
                                   rtol=1e-12)


def test_zero_mode_constant_estimate_positive():
    c = estimate_zero_mode_constant(grid_n=41)
    assert c > 0
