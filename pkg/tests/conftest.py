import numpy as np
import pytest

from fermisea import fixtures as fx
from fermisea.bloch import scf_periodic
from fermisea.lattice import embed_unit_field
from fermisea.supercell import scf_supercell


@pytest.fixture(scope="session")
def insulator():
    """Converged periodic solution of the shipped insulating crystal (bz 4)."""
    return scf_periodic(fx.insulator_config(), fx.insulator_nuclear(),
                        mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)


@pytest.fixture(scope="session")
def insulator_ref():
    """Dense-mesh (bz 8) reference standing in for the infinite crystal."""
    return scf_periodic(fx.insulator_config(bz_size=fx.REFERENCE_BZ),
                        fx.insulator_nuclear(),
                        mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)


@pytest.fixture(scope="session")
def periodic_by_mesh(insulator):
    """Periodic solutions keyed by bz mesh size, computed on demand."""
    cache = {fx.INSULATOR_BZ: insulator}

    def get(bz):
        if bz not in cache:
            cache[bz] = scf_periodic(fx.insulator_config(bz_size=bz),
                                     fx.insulator_nuclear(),
                                     mixing=fx.SCF_MIXING, tol=fx.SCF_TOL)
        return cache[bz]

    return get


@pytest.fixture(scope="session")
def supercell_neutral(periodic_by_mesh):
    """Neutral defect-free supercell solutions keyed by box size."""
    cache = {}

    def get(box):
        if box not in cache:
            per = periodic_by_mesh(box)
            warm = embed_unit_field(per.state.density, box)
            cache[box] = scf_supercell(fx.insulator_config(bz_size=box),
                                       fx.insulator_nuclear(), box,
                                       filling="neutral", mixing=fx.SCF_MIXING,
                                       tol=fx.SCF_TOL, initial=warm)
        return cache[box]

    return get


@pytest.fixture(scope="session")
def bound_defect_solution(supercell_neutral):
    """Charge q=+1 supercell solution of the tuned attractive defect (L=2)."""
    ref = supercell_neutral(2)
    return scf_supercell(fx.insulator_config(bz_size=2), fx.insulator_nuclear(), 2,
                         defect=fx.bound_state_defect(), filling="charge",
                         charge=1.0, mixing=0.35, tol=fx.SCF_TOL,
                         initial=ref.state.density)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
