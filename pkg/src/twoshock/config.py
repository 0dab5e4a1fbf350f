"""Scenario files: INI sections with flat keys, strictly validated.

Sections and keys (defaults in parentheses):

``[grid]``       x1_min, x1_max, n1, n2 (1), n3 (1), moving_frame (false)
``[fluid]``      gamma (2), pressure_coeff (1), mu (0.1), lambda_visc (0)
``[riemann]``    v_minus, u_minus, v_plus, u_plus, optional v_mid, u_mid
``[perturbation.<name>]``  center, width, amplitude, target (v), k2 (0), k3 (0)
``[weights]``    nu1, nu2 (sqrt of the strength, capped at 0.24)
``[run]``        t_end, cfl_safety (0.4), cadence (0), m_constant (5/4),
                 snapshot_format (npz), sponge_fraction (0.1), sponge_rate (2)
``[checks]``     suite (perturbed) plus the thresholds in ``CHECK_DEFAULTS``

Unknown sections or keys raise :class:`ConfigError`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .profiles import FluidParams

GRID_KEYS = {"x1_min": float, "x1_max": float, "n1": int, "n2": int, "n3": int, "moving_frame": bool}
FLUID_KEYS = {"gamma": float, "pressure_coeff": float, "mu": float, "lambda_visc": float}
RIEMANN_KEYS = {"v_minus": float, "u_minus": float, "v_plus": float, "u_plus": float,
                "v_mid": float, "u_mid": float}
BUMP_KEYS = {"center": float, "width": float, "amplitude": float, "target": str, "k2": int, "k3": int}
WEIGHT_KEYS = {"nu1": float, "nu2": float}
RUN_KEYS = {"t_end": float, "cfl_safety": float, "cadence": float, "m_constant": str,
            "snapshot_format": str, "sponge_fraction": float, "sponge_rate": float}

CHECK_DEFAULTS = {
    "suite": "perturbed",
    "transient": 1.0,
    "energy_rise_tol": 1e-6,
    "energy_decay_fraction": 0.95,
    "sup_ratio_max": 0.5,
    "terminal_rate_fraction": 0.1,
    "fit_r2_min": 0.9,
    "fit_t_min": 1.0,
    "null_shift_tol": 1e-14,
    "null_functional_tol": 1e-10,
    "null_deviation_floor": 1e-3,
}
SUITES = ("perturbed", "null")


def parse_m_constant(text: str) -> float:
    """``5/4``, ``4/3`` or any positive number, read as a multiple of sigma_m^4 v_m^2 alpha_m."""
    try:
        value = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad M constant {text!r}") from exc
    if value <= 0:
        raise ConfigError("M constant must be positive")
    return value


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind is bool:
            return {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}[raw.lower()]
        return kind(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from exc


def _read(cp, section, schema, required=()):
    if not cp.has_section(section):
        if required:
            raise ConfigError(f"missing section [{section}]")
        return {}
    out = {}
    for key, raw in cp.items(section):
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        out[key] = _convert(section, key, raw, schema[key])
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"[{section}] missing {', '.join(missing)}")
    return out


@dataclass
class Scenario:
    fluid: FluidParams
    riemann: dict
    grid: dict
    bumps: list
    weights: dict
    run: dict
    checks: dict
    source: str = ""
    raw_text: str = field(default="", repr=False)

    @property
    def m_factor(self) -> float:
        return parse_m_constant(self.run.get("m_constant", "5/4"))


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    return parse_scenario(text, source=str(path))


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario {source}: {exc}") from exc

    known = {"grid", "fluid", "riemann", "weights", "run", "checks"}
    for section in cp.sections():
        if section not in known and not section.startswith("perturbation."):
            raise ConfigError(f"unknown section [{section}]")

    grid = _read(cp, "grid", GRID_KEYS, required=("x1_min", "x1_max", "n1"))
    fluid_kw = _read(cp, "fluid", FLUID_KEYS)
    try:
        fluid = FluidParams(**fluid_kw)
    except ValueError as exc:
        raise ConfigError(f"[fluid] {exc}") from exc
    riemann = _read(cp, "riemann", RIEMANN_KEYS, required=("v_minus", "u_minus", "v_plus", "u_plus"))
    if ("v_mid" in riemann) != ("u_mid" in riemann):
        raise ConfigError("[riemann] give both v_mid and u_mid or neither")
    bumps = []
    for section in cp.sections():
        if section.startswith("perturbation."):
            bump = _read(cp, section, BUMP_KEYS, required=("center", "width", "amplitude"))
            bumps.append((section.split(".", 1)[1], bump))
    weights = _read(cp, "weights", WEIGHT_KEYS)
    run = _read(cp, "run", RUN_KEYS, required=("t_end",))
    if "m_constant" in run:
        parse_m_constant(run["m_constant"])
    if run.get("snapshot_format", "npz") not in ("npz", "csv"):
        raise ConfigError("[run] snapshot_format must be npz or csv")

    schema = {k: (str if isinstance(v, str) else float) for k, v in CHECK_DEFAULTS.items()}
    checks = dict(CHECK_DEFAULTS)
    checks.update(_read(cp, "checks", schema))
    if checks["suite"] not in SUITES:
        raise ConfigError(f"[checks] suite must be one of {SUITES}")
    return Scenario(fluid, riemann, grid, bumps, weights, run, checks, source, text)
