# config.py
"""
Unit-annotated run configuration.

Configs are YAML/JSON key-value trees in which every physical quantity
carries an explicit unit suffix ("87 nm", "3e-6 m/s"); bare numbers are
accepted only for dimensionless fields. Unit or dimension mismatches are
hard errors carrying the offending field path. Everything normalizes to
SI on parse, and a canonical annotated form can be emitted such that
re-parsing it reproduces an identical configuration (hash equality).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .ensemble import (DEFAULT_P_PUMP, DEFAULT_RHO, DiameterDistribution,
                       EnsembleConfig, PermeabilityDistribution,
                       PopulationDistributions)
from .fdm import FdmConfig
from .model import Environment, KineticConstants, ModelError, VesicleSpec
from .schedule import LightSignal, ScheduleError


class ConfigError(ValueError):
    """Configuration validation failure, annotated with the field path."""


# unit string -> (dimension, scale to SI)
UNITS: dict[str, tuple[str, float]] = {
    "m": ("length", 1.0), "mm": ("length", 1e-3), "um": ("length", 1e-6),
    "µm": ("length", 1e-6), "nm": ("length", 1e-9),
    "m^3": ("volume", 1.0), "m3": ("volume", 1.0), "L": ("volume", 1e-3),
    "mL": ("volume", 1e-6), "uL": ("volume", 1e-9), "µL": ("volume", 1e-9),
    "mol/m^3": ("concentration", 1.0), "mol/m3": ("concentration", 1.0),
    "mM": ("concentration", 1.0), "M": ("concentration", 1e3),
    "1/s": ("rate", 1.0), "/s": ("rate", 1.0),
    "m/s": ("speed", 1.0), "cm/s": ("speed", 1e-2), "um/s": ("speed", 1e-6),
    "s": ("time", 1.0), "ms": ("time", 1e-3), "min": ("time", 60.0),
    "h": ("time", 3600.0),
    "1/m^2": ("areal_density", 1.0), "1/m2": ("areal_density", 1.0),
    "1/um^2": ("areal_density", 1e12), "1/nm^2": ("areal_density", 1e18),
    "mol": ("amount", 1.0),
}

_CANONICAL_UNIT = {"length": "m", "volume": "m^3",
                   "concentration": "mol/m^3", "rate": "1/s",
                   "speed": "m/s", "time": "s", "areal_density": "1/m^2",
                   "amount": "mol"}


def parse_quantity(value, dimension: str, path: str) -> float:
    """Parse '<number> <unit>' into SI, enforcing the expected dimension."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        raise ConfigError(
            f"{path}: physical quantity needs a unit suffix, e.g. "
            f"'{value} {_CANONICAL_UNIT[dimension]}'")
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a quantity string, got {value!r}")
    parts = value.split()
    if len(parts) != 2:
        raise ConfigError(f"{path}: expected '<number> <unit>', got {value!r}")
    num_s, unit = parts
    try:
        num = float(num_s)
    except ValueError:
        raise ConfigError(f"{path}: bad number {num_s!r}") from None
    if unit not in UNITS:
        raise ConfigError(f"{path}: unknown unit {unit!r}")
    dim, scale = UNITS[unit]
    if dim != dimension:
        raise ConfigError(
            f"{path}: expected a {dimension} (e.g. "
            f"'{_CANONICAL_UNIT[dimension]}'), got {dim} unit {unit!r}")
    return num * scale


def format_quantity(si_value: float, dimension: str) -> str:
    return f"{si_value!r} {_CANONICAL_UNIT[dimension]}"


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a dimensionless number, "
                          f"got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return int(value)


def _section(tree: dict, name: str, required: bool = True) -> dict:
    sec = tree.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing section {name!r}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return sec


_SOLVERS = ("fdm", "exact", "closed")


@dataclass
class RunConfig:
    """Fully normalized (SI) description of one simulation run."""

    solvers: tuple[str, ...]
    seed: int
    vesicle: VesicleSpec | None
    population: PopulationDistributions | None
    kinetics: KineticConstants
    environment: Environment
    signal: LightSignal
    fdm: FdmConfig
    sample_interval: float
    ensemble: EnsembleConfig | None
    label: str = "run"

    def __post_init__(self):
        if (self.vesicle is None) == (self.population is None):
            raise ConfigError(
                "exactly one of 'vesicle' and 'population' must be present")
        if self.population is not None and self.ensemble is None:
            raise ConfigError("'population' runs need an 'ensemble' section")


def parse_config(tree: dict, label: str = "run") -> RunConfig:
    """Validate and normalize a configuration tree."""
    if not isinstance(tree, dict):
        raise ConfigError("top level must be a mapping")

    run = _section(tree, "run", required=False)
    solver = run.get("solver", "all")
    if solver == "all":
        solvers: tuple[str, ...] = _SOLVERS
    elif solver in _SOLVERS:
        solvers = (solver,)
    elif (isinstance(solver, list)
          and all(s in _SOLVERS for s in solver) and solver):
        solvers = tuple(solver)
    else:
        raise ConfigError(f"run.solver: expected one of {_SOLVERS + ('all',)}"
                          f" or a list thereof, got {solver!r}")
    seed = _integer(run.get("seed", 0), "run.seed")

    has_vesicle = "vesicle" in tree
    has_population = "population" in tree
    if has_vesicle == has_population:
        raise ConfigError(
            "exactly one of 'vesicle' and 'population' must be present")

    kin_t = _section(tree, "kinetics", required=False)
    kinetics = KineticConstants(
        pump_rate_per_protein=parse_quantity(
            kin_t.get("pump_rate_per_protein", "0.03 1/s"), "rate",
            "kinetics.pump_rate_per_protein"),
        symport_rate_per_protein=parse_quantity(
            kin_t.get("symport_rate_per_protein", "0.006 1/s"), "rate",
            "kinetics.symport_rate_per_protein"),
        stoichiometry=_number(kin_t.get("stoichiometry", 3),
                              "kinetics.stoichiometry"),
        k_m=parse_quantity(kin_t.get("k_m", "1.3e-2 mol/m^3"),
                           "concentration", "kinetics.k_m"),
        xi=_number(kin_t.get("xi", 0.015), "kinetics.xi"),
    )

    ens = None
    if "ensemble" in tree or has_population:
        e_t = _section(tree, "ensemble", required=has_population)
        ens = EnsembleConfig(
            n_ves=_number(e_t.get("n_ves", 1e11), "ensemble.n_ves"),
            n_mod=_integer(e_t.get("n_mod", 100), "ensemble.n_mod"),
            n_ex=_integer(e_t.get("n_ex", 10), "ensemble.n_ex"),
            seed=seed,
            v_out_tot=parse_quantity(e_t.get("v_out_tot", "1e-6 m^3"),
                                     "volume", "ensemble.v_out_tot"),
        )

    env_t = _section(tree, "environment", required=False)
    if has_vesicle:
        v_out = parse_quantity(env_t.get("v_out", "1e-17 m^3"), "volume",
                               "environment.v_out")
    else:
        if "v_out" in env_t:
            raise ConfigError("environment.v_out is derived from the "
                              "ensemble section in population runs")
        v_out = ens.v_out_per_vesicle
    try:
        environment = Environment(
            v_out=v_out,
            buffer_total=parse_quantity(env_t.get("buffer_total",
                                                  "20 mol/m^3"),
                                        "concentration",
                                        "environment.buffer_total"),
            k_a=parse_quantity(env_t.get("k_a", "6.2e-5 mol/m^3"),
                               "concentration", "environment.k_a"),
            c_h_in0=parse_quantity(env_t.get("c_h_in0", "3.98e-5 mol/m^3"),
                                   "concentration", "environment.c_h_in0"),
            c_h_out0=parse_quantity(env_t.get("c_h_out0", "3.98e-5 mol/m^3"),
                                    "concentration", "environment.c_h_out0"),
            c_s_in0=parse_quantity(env_t.get("c_s_in0", "300 mol/m^3"),
                                   "concentration", "environment.c_s_in0"),
        )
    except ModelError as exc:
        raise ConfigError(f"environment: {exc}") from None

    vesicle = None
    population = None
    if has_vesicle:
        v_t = _section(tree, "vesicle")
        try:
            vesicle = VesicleSpec(
                d_in=parse_quantity(v_t.get("d_in", "87 nm"), "length",
                                    "vesicle.d_in"),
                d_mem=parse_quantity(v_t.get("d_mem", "14 nm"), "length",
                                     "vesicle.d_mem"),
                n_pumps=_integer(v_t.get("n_pumps", 40), "vesicle.n_pumps"),
                n_sym=_integer(v_t.get("n_sym", 30), "vesicle.n_sym"),
                permeability=parse_quantity(v_t.get("permeability",
                                                    "3e-6 m/s"),
                                            "speed", "vesicle.permeability"),
                mode=v_t.get("mode", "symporter"),
            )
        except ModelError as exc:
            raise ConfigError(f"vesicle: {exc}") from None
    else:
        p_t = _section(tree, "population")
        d_t = _section(p_t, "diameter", required=False)
        log_unit = d_t.get("log_unit", "nm")
        if log_unit not in UNITS or UNITS[log_unit][0] != "length":
            raise ConfigError("population.diameter.log_unit: need a length "
                              f"unit, got {log_unit!r}")
        mu_shift = math.log(UNITS[log_unit][1])
        diameter = DiameterDistribution(
            shift=parse_quantity(d_t.get("shift", "39.74 nm"), "length",
                                 "population.diameter.shift"),
            mu_log=_number(d_t.get("mu_log", 4.16),
                           "population.diameter.mu_log") + mu_shift,
            sigma_log=_number(d_t.get("sigma_log", 0.62),
                              "population.diameter.sigma_log"),
        )
        g_t = _section(p_t, "permeability", required=False)
        g_unit = g_t.get("log_unit", "m/s")
        if g_unit not in UNITS or UNITS[g_unit][0] != "speed":
            raise ConfigError("population.permeability.log_unit: need a "
                              f"speed unit, got {g_unit!r}")
        g_shift = math.log10(UNITS[g_unit][1])
        permeability = PermeabilityDistribution(
            mu_log10=_number(g_t.get("mu_log10", -5.52),
                             "population.permeability.mu_log10") + g_shift,
            sigma_log10=_number(g_t.get("sigma_log10", 0.25),
                                "population.permeability.sigma_log10"),
            lo_log10=_number(g_t.get("lo_log10", -5.77),
                             "population.permeability.lo_log10") + g_shift,
            hi_log10=_number(g_t.get("hi_log10", -5.27),
                             "population.permeability.hi_log10") + g_shift,
        )
        pr_t = _section(p_t, "proteins", required=False)
        population = PopulationDistributions(
            diameter=diameter, permeability=permeability,
            rho=parse_quantity(pr_t.get("rho", f"{DEFAULT_RHO!r} 1/m^2"),
                               "areal_density", "population.proteins.rho"),
            p_pump=_number(pr_t.get("p_pump", DEFAULT_P_PUMP),
                           "population.proteins.p_pump"),
            d_mem=parse_quantity(p_t.get("d_mem", "14 nm"), "length",
                                 "population.d_mem"),
            mode=p_t.get("mode", "symporter"),
        )

    sig_t = _section(tree, "signal")
    intervals = sig_t.get("intervals", [])
    if not isinstance(intervals, list) or not all(
            isinstance(iv, (list, tuple)) and len(iv) == 2
            for iv in intervals):
        raise ConfigError("signal.intervals: expected a list of "
                          "[t_on, t_off] second pairs")
    if sig_t.get("horizon") is None:
        raise ConfigError("signal.horizon missing")
    try:
        signal = LightSignal([(float(a), float(b)) for a, b in intervals],
                             horizon=_number(sig_t["horizon"],
                                             "signal.horizon"))
    except ScheduleError as exc:
        raise ConfigError(f"signal: {exc}") from None

    fdm_t = _section(tree, "fdm", required=False)
    try:
        fdm_cfg = FdmConfig(
            dt=parse_quantity(fdm_t.get("dt", "1e-2 s"), "time", "fdm.dt"),
            record_stride=_integer(fdm_t.get("record_stride", 10),
                                   "fdm.record_stride"),
        )
    except ValueError as exc:
        raise ConfigError(f"fdm: {exc}") from None

    sample_interval = _number(tree.get("sample_interval", 0.1),
                              "sample_interval")
    if sample_interval <= 0:
        raise ConfigError("sample_interval must be > 0")

    return RunConfig(solvers=solvers, seed=seed, vesicle=vesicle,
                     population=population, kinetics=kinetics,
                     environment=environment, signal=signal, fdm=fdm_cfg,
                     sample_interval=sample_interval, ensemble=ens,
                     label=label)


def load_config(path, label: str | None = None) -> RunConfig:
    with open(path) as fh:
        tree = yaml.safe_load(fh)
    return parse_config(tree, label=label or str(path))


def to_config_tree(cfg: RunConfig) -> dict:
    """Canonical annotated tree; parsing it reproduces `cfg` exactly."""
    tree: dict = {
        "run": {"solver": list(cfg.solvers), "seed": cfg.seed},
        "kinetics": {
            "pump_rate_per_protein": format_quantity(
                cfg.kinetics.pump_rate_per_protein, "rate"),
            "symport_rate_per_protein": format_quantity(
                cfg.kinetics.symport_rate_per_protein, "rate"),
            "stoichiometry": cfg.kinetics.stoichiometry,
            "k_m": format_quantity(cfg.kinetics.k_m, "concentration"),
            "xi": cfg.kinetics.xi,
        },
        "environment": {
            "buffer_total": format_quantity(cfg.environment.buffer_total,
                                            "concentration"),
            "k_a": format_quantity(cfg.environment.k_a, "concentration"),
            "c_h_in0": format_quantity(cfg.environment.c_h_in0,
                                       "concentration"),
            "c_h_out0": format_quantity(cfg.environment.c_h_out0,
                                        "concentration"),
            "c_s_in0": format_quantity(cfg.environment.c_s_in0,
                                       "concentration"),
        },
        "signal": {
            "intervals": [[a, b] for a, b in cfg.signal.intervals],
            "horizon": cfg.signal.horizon,
        },
        "fdm": {"dt": format_quantity(cfg.fdm.dt, "time"),
                "record_stride": cfg.fdm.record_stride},
        "sample_interval": cfg.sample_interval,
    }
    if cfg.vesicle is not None:
        v = cfg.vesicle
        tree["vesicle"] = {
            "d_in": format_quantity(v.d_in, "length"),
            "d_mem": format_quantity(v.d_mem, "length"),
            "n_pumps": v.n_pumps, "n_sym": v.n_sym,
            "permeability": format_quantity(v.permeability, "speed"),
            "mode": v.mode,
        }
        tree["environment"]["v_out"] = format_quantity(
            cfg.environment.v_out, "volume")
    else:
        p = cfg.population
        tree["population"] = {
            "diameter": {"shift": format_quantity(p.diameter.shift, "length"),
                         "mu_log": p.diameter.mu_log, "log_unit": "m",
                         "sigma_log": p.diameter.sigma_log},
            "permeability": {"mu_log10": p.permeability.mu_log10,
                             "sigma_log10": p.permeability.sigma_log10,
                             "lo_log10": p.permeability.lo_log10,
                             "hi_log10": p.permeability.hi_log10,
                             "log_unit": "m/s"},
            "proteins": {"rho": format_quantity(p.rho, "areal_density"),
                         "p_pump": p.p_pump},
            "d_mem": format_quantity(p.d_mem, "length"),
            "mode": p.mode,
        }
    if cfg.ensemble is not None:
        tree["ensemble"] = {
            "n_ves": cfg.ensemble.n_ves, "n_mod": cfg.ensemble.n_mod,
            "n_ex": cfg.ensemble.n_ex,
            "v_out_tot": format_quantity(cfg.ensemble.v_out_tot, "volume"),
        }
    return tree


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical configuration tree."""
    blob = json.dumps(to_config_tree(cfg), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
