import json
import subprocess
import sys

import numpy as np
import pytest

from fermisea.config import (
    ConfigError,
    config_hash,
    load_config,
    parse_config,
    write_csv,
    write_json,
)

MINIMAL = """
[lattice]
cutoff = 20.0
grid_n = 9
bz_size = 2

[nuclear]
Z = 1
form = "uniform"
"""

FULL = """
[lattice]
cutoff = 0.8
grid_n = 55
bz_size = 4
lattice_constant = 10.0

[nuclear]
Z = 1
sigma = 0.5
form = "gaussian"

[[defect.sites]]
center = [1.7, 0.9, -1.1]
amplitude = 1.15
width = 0.8

[solver]
mixing = 0.4
tol = 1e-8
max_iter = 500
deterministic = true

[run]
mode = "scf-periodic"
L_list = [1, 2, 3]
"""


@pytest.fixture
def minimal_path(tmp_path):
    p = tmp_path / "minimal.toml"
    p.write_text(MINIMAL)
    return str(p)


class TestConfigParsing:
    def test_minimal(self, minimal_path):
        cfg = load_config(minimal_path)
        assert cfg.nuclear.form == "uniform"
        assert cfg.lattice.bz_size == 2
        assert cfg.solver.mixing == 0.3      # default
        assert cfg.defect is None

    def test_full(self, tmp_path):
        p = tmp_path / "full.toml"
        p.write_text(FULL)
        cfg = load_config(str(p))
        assert cfg.defect is not None
        assert cfg.defect.sites[0].amplitude == 1.15
        assert cfg.lattice.lattice_constant == 10.0
        assert cfg.run.L_list == [1, 2, 3]

    def test_unknown_key_rejected_with_name(self):
        with pytest.raises(ConfigError, match="lattice.cutof"):
            parse_config({"lattice": {"cutof": 1.0}})

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="potato"):
            parse_config({"potato": {}})

    def test_negative_cutoff_names_key(self):
        with pytest.raises(ConfigError, match="lattice.cutoff"):
            parse_config({"lattice": {"cutoff": -3.0, "grid_n": 9},
                          "nuclear": {"Z": 1}})

    def test_bad_site_rejected(self):
        with pytest.raises(ConfigError, match=r"defect.sites\[0\]"):
            parse_config({"lattice": {"cutoff": 1.0, "grid_n": 9},
                          "nuclear": {"Z": 1},
                          "defect": {"sites": [{"center": [0, 0], "amplitude": 1.0,
                                                "width": 0.1}]}})

    def test_missing_required(self):
        with pytest.raises(ConfigError):
            parse_config({"nuclear": {"Z": 1}})

    def test_hash_stable_and_sensitive(self, minimal_path):
        cfg = load_config(minimal_path)
        again = load_config(minimal_path)
        assert cfg.config_hash == again.config_hash
        other = parse_config({"lattice": {"cutoff": 21.0, "grid_n": 9},
                              "nuclear": {"Z": 1, "form": "uniform"}})
        assert other.config_hash != cfg.config_hash


class TestOutputs:
    def test_atomic_json_round_trip(self, tmp_path):
        path = tmp_path / "out" / "report.json"
        write_json(str(path), {"b": 2, "a": [1.5, "x"]})
        data = json.loads(path.read_text())
        assert data == {"b": 2, "a": [1.5, "x"]}

    def test_csv_format(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_csv(str(path), ["L", "value"], [(1, 0.5), (2, 0.25)])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "L,value"
        assert lines[1] == "1,0.5"


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "fermisea.cli", *args],
                          capture_output=True, text=True)


class TestCli:
    def test_scf_periodic_emits_json(self, tmp_path, minimal_path):
        res = run_cli("scf-periodic", "--config", minimal_path, "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        payload = json.loads((tmp_path / "scf_periodic.json").read_text())
        assert payload["gap"]["open"] is False          # free electrons
        np.testing.assert_allclose(payload["I0_per"], 0.75 * np.pi**2, rtol=1e-9)
        assert payload["iterations"] == 1
        assert "config_hash" in payload and "version" in payload

    def test_bad_config_exits_nonzero(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[lattice]\ncutoff = -2.0\ngrid_n = 9\n[nuclear]\nZ = 1\n")
        res = run_cli("scf-periodic", "--config", str(p), "--out", str(tmp_path))
        assert res.returncode != 0
        assert "cutoff" in res.stderr

    def test_bands_csv(self, tmp_path, minimal_path):
        res = run_cli("bands", "--config", minimal_path, "--out", str(tmp_path),
                      "--path", "0,0,0:0.5,0,0", "--points", "3", "--bands", "2")
        assert res.returncode == 0, res.stderr
        lines = (tmp_path / "bands.csv").read_text().strip().splitlines()
        assert lines[0].startswith("xi1,xi2,xi3,n,")
        assert len(lines) == 1 + 4 * 2      # 3 points + endpoint, 2 bands each

    def test_deterministic_reruns_byte_identical(self, tmp_path, minimal_path):
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        for out in (out1, out2):
            res = run_cli("scf-periodic", "--config", minimal_path, "--out", str(out))
            assert res.returncode == 0, res.stderr

        def strip_timestamp(path):
            data = json.loads(path.read_text())
            data.pop("generated_at")
            return json.dumps(data, sort_keys=True)

        assert strip_timestamp(out1 / "scf_periodic.json") == \
            strip_timestamp(out2 / "scf_periodic.json")

    def test_validate_subcommand(self):
        res = run_cli("validate")
        assert res.returncode == 0, res.stdout + res.stderr
        assert "ok" in res.stdout

    def test_run_dispatch(self, tmp_path, minimal_path):
        res = run_cli("run", "--config", minimal_path, "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        assert (tmp_path / "scf_periodic.json").exists()

    def test_supercell_subcommand(self, tmp_path, minimal_path):
        res = run_cli("supercell", "--config", minimal_path, "--out", str(tmp_path),
                      "--L", "2", "--mode", "neutral")
        assert res.returncode == 0, res.stderr
        payload = json.loads((tmp_path / "supercell.json").read_text())
        # global Aufbau over the box: 0 + 6*(pi^2/2) + a 1/12 spread over the
        # third shell = 4 pi^2 (free electrons fill across fibers)
        np.testing.assert_allclose(payload["energy"], 4 * np.pi**2, rtol=1e-9)
