import numpy as np
import pytest

from fermisea import fixtures as fx
from fermisea.charges import DefectCharge, NuclearModel, mu_field, mu_field_supercell, nu_field
from fermisea.lattice import LatticeConfig, LatticeError, fourier_index_1d

TWO_PI = 2 * np.pi


@pytest.fixture
def unit_config():
    return LatticeConfig(cutoff=20.0, bz_size=2, grid_n=27)


class TestNuclearModel:
    def test_uniform_is_constant(self, unit_config):
        mu = mu_field(NuclearModel(Z=1, form="uniform"), unit_config)
        assert mu.zero_mode() == 1.0
        assert np.count_nonzero(mu.coeffs) == 1
        np.testing.assert_allclose(mu.real_space(), 1.0)

    def test_gaussian_coefficients(self, unit_config):
        mu = mu_field(NuclearModel(Z=4, sigma=0.08), unit_config)
        np.testing.assert_allclose(mu.integral(), 4.0, atol=1e-12)
        got = np.real(mu.coeffs[1, 0, 0])
        expected = 4.0 * np.exp(-0.5 * 0.08**2 * TWO_PI**2)
        np.testing.assert_allclose(got, expected, rtol=1e-13)
        np.testing.assert_allclose(expected, 3.5253, atol=2e-4)

    def test_gaussian_pointwise_nonnegative(self, unit_config):
        mu = mu_field(NuclearModel(Z=4, sigma=0.1), unit_config)
        assert mu.real_space().min() >= -1e-12

    def test_fixture_crystal_nonnegative(self):
        cfg = fx.insulator_config()
        mu = mu_field(fx.insulator_nuclear(), cfg)
        assert mu.real_space().min() >= -1e-12
        np.testing.assert_allclose(mu.integral(), fx.INSULATOR_Z, atol=1e-12)

    def test_lattice_translation_invariance(self, unit_config):
        # Fourier support on the unit reciprocal lattice only
        mu = mu_field(NuclearModel(Z=2, sigma=0.1), unit_config)
        moved = mu.translated([1.0, -2.0, 3.0])
        np.testing.assert_allclose(moved.coeffs, mu.coeffs, atol=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(LatticeError):
            NuclearModel(Z=0)
        with pytest.raises(LatticeError):
            NuclearModel(Z=1, sigma=-0.5)
        with pytest.raises(LatticeError):
            NuclearModel(Z=1, form="pointlike")

    def test_supercell_embedding_zero_mode(self, unit_config):
        mu_l = mu_field_supercell(NuclearModel(Z=3, sigma=0.1), unit_config, 3)
        np.testing.assert_allclose(mu_l.integral(), 3 * 27, atol=1e-10)
        # only multiples of L carry weight
        n = unit_config.grid_n * 3
        idx = fourier_index_1d(n)
        live = np.abs(mu_l.coeffs) > 1e-14
        live_idx = idx[np.any(live, axis=(1, 2))]
        assert np.all(live_idx % 3 == 0)


class TestDefectCharge:
    def test_total_charge(self):
        d = DefectCharge.from_lists([
            {"center": (0, 0, 0), "amplitude": 1.0, "width": 0.1},
            {"center": (0.2, 0, 0), "amplitude": -0.4, "width": 0.2},
        ])
        np.testing.assert_allclose(d.total_charge, 0.6)

    def test_empty_mixture_is_zero_field(self, unit_config):
        fld = nu_field(DefectCharge(sites=()), 2, unit_config)
        assert fld.norm_l2() == 0.0

    def test_single_site_normalisation(self, unit_config):
        d = DefectCharge.from_lists([
            {"center": (0, 0, 0), "amplitude": 1.0, "width": 0.1}])
        fld = nu_field(d, 2, unit_config)
        assert abs(fld.integral() - 1.0) <= 1e-10

    def test_vacancy_balances_cell_charge(self):
        # one missing nucleus: the average charge drops by Z/L^3 per cell
        cfg = fx.insulator_config()
        nuc = fx.insulator_nuclear()
        L = 2
        vac = DefectCharge.from_lists([
            {"center": (0, 0, 0), "amplitude": -float(nuc.Z), "width": nuc.sigma}])
        mu_l = mu_field_supercell(nuc, cfg, L)
        nu_l = nu_field(vac, L, cfg)
        total = (mu_l + nu_l).integral()
        np.testing.assert_allclose(total, nuc.Z * L**3 - nuc.Z, atol=1e-9)

    def test_site_outside_box_rejected(self, unit_config):
        d = DefectCharge.from_lists([
            {"center": (1.2, 0, 0), "amplitude": 1.0, "width": 0.1}])
        with pytest.raises(LatticeError):
            nu_field(d, 2, unit_config)

    def test_invalid_width(self):
        with pytest.raises(LatticeError):
            DefectCharge.from_lists([
                {"center": (0, 0, 0), "amplitude": 1.0, "width": 0.0}])

    def test_zero_mode_bookkeeping_across_boxes(self):
        cfg = fx.insulator_config()
        d = fx.bound_state_defect()
        for L in (2, 3):
            fld = nu_field(d, L, cfg)
            np.testing.assert_allclose(fld.zero_mode(),
                                       d.total_charge / (L * fx.INSULATOR_A)**3,
                                       rtol=1e-9)
