"""Run configuration: TOML schema, validation, hashing, atomic outputs."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:            # Python < 3.11
    import tomli as tomllib

from .charges import DefectCharge, NuclearModel
from .lattice import LatticeConfig


class ConfigError(ValueError):
    """Malformed run configuration; the message names the offending key."""


_SCHEMA = {
    "lattice": {
        "cutoff": float,
        "grid_n": int,
        "bz_size": int,
        "lattice_constant": float,
    },
    "nuclear": {
        "Z": int,
        "sigma": float,
        "form": str,
    },
    "defect": {
        "sites": list,
    },
    "solver": {
        "mixing": float,
        "tol": float,
        "max_iter": int,
        "deterministic": bool,
        "anderson": bool,
        "zero_mode_c": float,
    },
    "run": {
        "mode": str,
        "L_list": list,
        "ef": float,
        "q": float,
    },
}

_SITE_KEYS = {"center": list, "amplitude": float, "width": float}

_DEFAULTS = {
    "lattice": {"bz_size": 4, "lattice_constant": 1.0},
    "solver": {"mixing": 0.3, "tol": 1e-8, "max_iter": 500,
               "deterministic": True, "anderson": False, "zero_mode_c": 0.0},
    "run": {"mode": "scf-periodic", "L_list": [1, 2, 3], "ef": None, "q": 0.0},
}


@dataclass
class SolverOptions:
    mixing: float = 0.3
    tol: float = 1e-8
    max_iter: int = 500
    deterministic: bool = True
    anderson: bool = False
    zero_mode_c: float = 0.0


@dataclass
class RunOptions:
    mode: str = "scf-periodic"
    L_list: list = field(default_factory=lambda: [1, 2, 3])
    ef: float | None = None
    q: float = 0.0


@dataclass
class RunConfig:
    lattice: LatticeConfig
    nuclear: NuclearModel
    defect: DefectCharge | None
    solver: SolverOptions
    run: RunOptions
    raw: dict

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def _coerce(value, expected, path):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, expected):
        raise ConfigError(f"{path}: expected {expected.__name__}, got {value!r}")
    return value


def _validate_tree(data: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a table")
    out: dict = {}
    for section, content in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"[{section}] must be a table")
        known = _SCHEMA[section]
        got = {}
        for key, value in content.items():
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            got[key] = _coerce(value, known[key], f"{section}.{key}")
        out[section] = got
    return out


def _validate_values(tree: dict):
    lat = tree.get("lattice", {})
    if "cutoff" in lat and lat["cutoff"] <= 0:
        raise ConfigError(f"lattice.cutoff must be positive, got {lat['cutoff']}")
    if "grid_n" in lat and (lat["grid_n"] < 3 or lat["grid_n"] % 2 == 0):
        raise ConfigError(f"lattice.grid_n must be an odd integer >= 3, got {lat['grid_n']}")
    nuc = tree.get("nuclear", {})
    if "Z" in nuc and nuc["Z"] < 1:
        raise ConfigError(f"nuclear.Z must be a positive integer, got {nuc['Z']}")
    if nuc.get("form", "gaussian") not in ("gaussian", "uniform"):
        raise ConfigError(f"nuclear.form must be 'gaussian' or 'uniform', got {nuc.get('form')!r}")
    sol = tree.get("solver", {})
    if "mixing" in sol and not 0 < sol["mixing"] <= 1:
        raise ConfigError(f"solver.mixing must be in (0, 1], got {sol['mixing']}")
    if "tol" in sol and sol["tol"] <= 0:
        raise ConfigError(f"solver.tol must be positive, got {sol['tol']}")
    run = tree.get("run", {})
    if "L_list" in run:
        ls = run["L_list"]
        if not ls or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in ls):
            raise ConfigError(f"run.L_list must be a list of positive integers, got {ls}")
    for i, site in enumerate(tree.get("defect", {}).get("sites", [])):
        path = f"defect.sites[{i}]"
        if not isinstance(site, dict):
            raise ConfigError(f"{path} must be a table")
        for key, value in site.items():
            if key not in _SITE_KEYS:
                raise ConfigError(f"unknown key {path}.{key}")
            _coerce(value, _SITE_KEYS[key], f"{path}.{key}")
        for key in _SITE_KEYS:
            if key not in site:
                raise ConfigError(f"{path} is missing {key}")
        if len(site["center"]) != 3:
            raise ConfigError(f"{path}.center must be a 3-vector")
        if site["width"] <= 0:
            raise ConfigError(f"{path}.width must be positive, got {site['width']}")


def parse_config(data: dict) -> RunConfig:
    tree = _validate_tree(data)
    _validate_values(tree)
    for name, defaults in _DEFAULTS.items():
        tree.setdefault(name, {})
        for key, value in defaults.items():
            tree[name].setdefault(key, value)
    if "cutoff" not in tree["lattice"] or "grid_n" not in tree["lattice"]:
        raise ConfigError("lattice.cutoff and lattice.grid_n are required")
    if "nuclear" not in tree or "Z" not in tree["nuclear"]:
        raise ConfigError("nuclear.Z is required")
    tree["nuclear"].setdefault("sigma", 0.1)
    tree["nuclear"].setdefault("form", "gaussian")

    lattice = LatticeConfig(cutoff=tree["lattice"]["cutoff"],
                            bz_size=tree["lattice"]["bz_size"],
                            grid_n=tree["lattice"]["grid_n"],
                            lattice_constant=tree["lattice"]["lattice_constant"])
    nuclear = NuclearModel(Z=tree["nuclear"]["Z"], sigma=tree["nuclear"]["sigma"],
                           form=tree["nuclear"]["form"])
    sites = tree.get("defect", {}).get("sites", [])
    defect = DefectCharge.from_lists(sites) if sites else None
    solver = SolverOptions(**tree["solver"])
    run = RunOptions(**tree["run"])
    return RunConfig(lattice=lattice, nuclear=nuclear, defect=defect,
                     solver=solver, run=run, raw=tree)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def config_hash(tree: dict) -> str:
    canonical = json.dumps(tree, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def atomic_write_text(path: str, text: str):
    """Write via a temporary file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path: str, header, rows):
    lines = [",".join(str(h) for h in header)]
    lines += [",".join(format(v, ".12g") if isinstance(v, float) else str(v)
                       for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")
