# sweep.py
"""
Parameter sweeps: symport-duration scans and ensemble sensitivity studies.

  fig6   symport duration and released substrate vs illumination duration
         for several symport rate constants and membrane permeabilities
  fig10  ensemble response for mean inner diameters of 100/500/1000 nm
  fig11  ensemble response for mean permeabilities of 1/5/10 x 1e-6 m/s

Each sweep yields one row per point; per-point failures are recorded in
the row and do not abort the sweep.
"""

from __future__ import annotations

import dataclasses
import math
import traceback
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytic import run_analytic
from .ensemble import (DiameterDistribution, EnsembleConfig,
                       PermeabilityDistribution, PopulationDistributions,
                       run_ensemble)
from .fdm import FdmConfig, simulate_svs
from .model import (default_environment, default_kinetics,
                    default_vesicle)
from .schedule import LightSignal


@dataclass
class SweepSpec:
    name: str
    description: str
    kind: str                                  # 'illumination' | 'ensemble'
    points: list[dict] = field(default_factory=list)
    seed: int = 0


@dataclass
class SweepResult:
    name: str
    rows: list[dict]
    summary: dict


# --- fig6 --------------------------------------------------------------------

FIG6_DURATIONS = (15.0, 30.0, 45.0, 60.0, 90.0, 120.0, 180.0, 240.0,
                  300.0, 400.0, 500.0, 600.0)
FIG6_COMBOS = ((0.005, 3e-6), (0.006, 3e-6), (0.008, 3e-6),
               (0.006, 5e-6), (0.006, 1e-5))
FIG6_TAIL = 800.0  # dark margin after the illumination window


def fig6_sweep(seed: int = 0) -> SweepSpec:
    points = [{"symport_rate": g_sym, "permeability": g_l, "duration": d}
              for (g_sym, g_l) in FIG6_COMBOS for d in FIG6_DURATIONS]
    return SweepSpec(
        name="fig6",
        description="symport duration vs illumination duration for symport "
                    "rates 0.005/0.006/0.008 1/s and permeabilities "
                    "3/5/10 x 1e-6 m/s",
        kind="illumination", points=points, seed=seed)


def _fig6_point(point: dict) -> dict:
    g_sym, g_l, dur = (point["symport_rate"], point["permeability"],
                       point["duration"])
    spec = dataclasses.replace(default_vesicle(), permeability=g_l)
    kin = dataclasses.replace(default_kinetics(),
                              symport_rate_per_protein=g_sym)
    env = default_environment()
    signal = LightSignal([(0.0, dur)], horizon=dur + FIG6_TAIL)

    row = dict(point)
    closed = run_analytic(spec, kin, env, signal, "closed",
                          sample_times=np.array([0.0, dur, dur + FIG6_TAIL]))
    cyc = closed.schedule.cycles[0]
    row["t2_closed"] = cyc.t2
    row["t4_closed"] = cyc.t4
    row["symport_duration_closed"] = cyc.symport_duration
    row["c_s_out_end_illumination"] = float(
        np.interp(dur, closed.t, closed.c_s_out))
    row["depletion_time"] = closed.depletion_time()

    fdm = simulate_svs(spec, kin, env, signal,
                       FdmConfig(dt=1e-2, record_stride=100))
    fcyc = fdm.schedule.cycles[0]
    row["symport_duration_fdm"] = fcyc.symport_duration
    return row


def _min_illumination(g_sym: float, g_l: float) -> float:
    """Shortest illumination that still triggers symport (cold start)."""
    spec = dataclasses.replace(default_vesicle(), permeability=g_l)
    kin = dataclasses.replace(default_kinetics(),
                              symport_rate_per_protein=g_sym)
    env = default_environment()
    long_sig = LightSignal([(0.0, 1e4)], horizon=2e4)
    traj = run_analytic(spec, kin, env, long_sig, "closed",
                        sample_times=np.array([0.0, 2e4]))
    c = traj.schedule.cycles[0]
    return c.t2 if c.t4 > c.t2 else math.inf


# --- fig10 / fig11 -----------------------------------------------------------

FIG10_DIAMETERS_NM = (100.0, 500.0, 1000.0)
FIG11_PERMEABILITIES = (1e-6, 5e-6, 1e-5)
SENSITIVITY_SIGNAL = ((0.0, 800.0),)
SENSITIVITY_HORIZON = 1600.0


def fig10_sweep(seed: int = 0) -> SweepSpec:
    points = [{"d_mean_nm": d} for d in FIG10_DIAMETERS_NM]
    return SweepSpec(name="fig10",
                     description="ensemble sensitivity to the mean inner "
                                 "vesicle diameter (100/500/1000 nm)",
                     kind="ensemble", points=points, seed=seed)


def fig11_sweep(seed: int = 0) -> SweepSpec:
    points = [{"g_l_mean": g} for g in FIG11_PERMEABILITIES]
    return SweepSpec(name="fig11",
                     description="ensemble sensitivity to the mean membrane "
                                 "permeability (1/5/10 x 1e-6 m/s)",
                     kind="ensemble", points=points, seed=seed)


def _population_for_point(point: dict) -> PopulationDistributions:
    pop = PopulationDistributions()
    if "d_mean_nm" in point:
        pop = dataclasses.replace(
            pop, diameter=DiameterDistribution.with_mean(
                point["d_mean_nm"] * 1e-9))
    if "g_l_mean" in point:
        pop = dataclasses.replace(
            pop, permeability=PermeabilityDistribution.with_mean_log10(
                math.log10(point["g_l_mean"])))
    return pop


def _ensemble_point(point: dict, seed: int) -> dict:
    pop = _population_for_point(point)
    ens = EnsembleConfig(n_mod=100, n_ex=10, seed=seed)
    env = default_environment(v_out=ens.v_out_per_vesicle)
    signal = LightSignal(SENSITIVITY_SIGNAL, horizon=SENSITIVITY_HORIZON)
    res = run_ensemble(pop, default_kinetics(), env, signal, ens,
                       solver="closed",
                       sample_times=np.linspace(0.0, SENSITIVITY_HORIZON, 81))
    t_end_ill = SENSITIVITY_SIGNAL[0][1]
    row = dict(point)
    row["peak_interex_mean_c_h_in"] = float(np.max(res.interex_mean_c_h_in))
    row["c_h_in_end_illumination"] = res.value_at(res.interex_mean_c_h_in,
                                                  t_end_ill)
    row["median_symport_start"] = float(np.median(res.symport_start_median))
    row["median_symport_end"] = float(np.nanmedian(res.symport_end_median))
    row["terminal_interex_mean_c_s_out"] = float(
        res.interex_mean_c_s_out[-1])
    row["terminal_interex_var_c_s_out"] = float(res.interex_var_c_s_out[-1])
    row["c_s_out_end_illumination"] = res.value_at(res.interex_mean_c_s_out,
                                                   t_end_ill)
    return row


# --- driver -------------------------------------------------------------------

def _point_worker(args) -> dict:
    kind, point, seed = args
    try:
        if kind == "illumination":
            return _fig6_point(point)
        return _ensemble_point(point, seed)
    except Exception as exc:  # noqa: BLE001 - per-point isolation
        row = dict(point)
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["traceback"] = traceback.format_exc(limit=3)
        return row


def run_sweep(sweep: SweepSpec, workers: int = 1) -> SweepResult:
    """Execute every sweep point, recording failures without aborting.

    Points run concurrently for workers > 1; the result order always
    follows the point order, so parallelism cannot change the output.
    """
    jobs = [(sweep.kind, point, sweep.seed) for point in sweep.points]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_point_worker, jobs))
    else:
        rows = [_point_worker(j) for j in jobs]
    summary = _summarize(sweep, rows)
    return SweepResult(name=sweep.name, rows=rows, summary=summary)


def _summarize(sweep: SweepSpec, rows: list[dict]) -> dict:
    ok = [r for r in rows if "error" not in r]
    summary: dict = {"points": len(rows), "failed": len(rows) - len(ok)}
    if sweep.kind == "illumination":
        by_combo: dict = {}
        for (g_sym, g_l) in FIG6_COMBOS:
            sel = [r for r in ok if r["symport_rate"] == g_sym
                   and r["permeability"] == g_l]
            if not sel:
                continue
            key = f"gamma_sym={g_sym:g},g_l={g_l:g}"
            t_min = _min_illumination(g_sym, g_l)
            xs = np.array([r["duration"] for r in sel])
            ys = np.array([r["symport_duration_closed"] for r in sel])
            mask = xs > t_min
            entry = {"min_illumination_time": float(t_min)}
            if mask.sum() >= 3:
                slope, icept = np.polyfit(xs[mask], ys[mask], 1)
                pred = slope * xs[mask] + icept
                ss_res = float(np.sum((ys[mask] - pred) ** 2))
                ss_tot = float(np.sum((ys[mask] - ys[mask].mean()) ** 2))
                entry["linear_fit_slope"] = float(slope)
                entry["linear_fit_r2"] = (1.0 - ss_res / ss_tot
                                          if ss_tot > 0 else 1.0)
            by_combo[key] = entry
        summary["combos"] = by_combo
    else:
        key = "d_mean_nm" if sweep.name == "fig10" else "g_l_mean"
        summary["ordering_key"] = key
        summary["rows"] = {f"{r[key]:g}": {k: v for k, v in r.items()
                                           if k != key} for r in ok}
    return summary


SWEEP_PRESETS: dict[str, Callable[..., SweepSpec]] = {
    "fig6": fig6_sweep,
    "fig10": fig10_sweep,
    "fig11": fig11_sweep,
}
