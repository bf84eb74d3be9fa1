"""Simulation engine for optically controlled vesicular release devices.

Vesicles carrying light-driven proton pumps and proton/substrate
symporters are modeled through three cross-validating solvers (explicit
finite differences as ground truth, an exact analytical solution, and a
closed-form approximation), an illumination cycle-phase state machine,
and a stochastic multi-vesicle ensemble layer with inter-experiment
statistics.
"""

from .analytic import lambert_w0, lambert_w0_exp, run_analytic
from .buffering import attenuation_factor, equilibrate, free_proton_conc
from .ensemble import (EnsembleConfig, PopulationDistributions,
                       jensen_gap_check, run_ensemble, sample_vesicle)
from .fdm import FdmConfig, simulate_mvs_shared_pool, simulate_svs, step_svs
from .model import (AVOGADRO, DerivedRates, Environment, KineticConstants,
                    SystemState, VesicleSpec, derive_rates, leakage_flux,
                    pump_flux, symport_flux)
from .schedule import CycleSchedule, LightSignal, clip_cycle_times
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "AVOGADRO", "CycleSchedule", "DerivedRates", "EnsembleConfig",
    "Environment", "FdmConfig", "KineticConstants", "LightSignal",
    "PopulationDistributions", "SystemState", "Trajectory", "VesicleSpec",
    "attenuation_factor", "clip_cycle_times", "derive_rates", "equilibrate",
    "free_proton_conc", "jensen_gap_check", "lambert_w0", "lambert_w0_exp",
    "leakage_flux", "pump_flux", "run_analytic", "run_ensemble",
    "sample_vesicle", "simulate_mvs_shared_pool", "simulate_svs",
    "step_svs", "symport_flux",
]
