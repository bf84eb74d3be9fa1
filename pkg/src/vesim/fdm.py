# fdm.py
"""
Forward-Euler ground-truth integrator for the vesicle transport ODEs.

Compartment totals (free + buffer-complexed H+) are stepped with fluxes
evaluated at the free concentrations, then both compartments are
re-equilibrated through the mass-action quadratic; binding kinetics are
assumed fast relative to transport. The substrate has no buffer
interaction. Explicit Euler at a fixed step keeps the baseline
bit-reproducible; a stiffness check refuses steps that the fastest phase
coefficient would destabilize.

Symport threshold crossings are detected by the sign change of
(C_H_in - C_switch) with linear interpolation between steps and then
assembled into the same cycle schedule the analytic solvers produce.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .analytic import DEPLETION_FRACTION_OF_KM
from .buffering import buffering_slowdown, free_proton_conc, total_conc_from_free
from .model import (DerivedRates, Environment, KineticConstants, VesicleSpec,
                    derive_rates)
from .schedule import LightSignal, schedule_from_crossings
from .trajectory import Event, Trajectory


class FdmStabilityError(RuntimeError):
    """Requested time step violates the explicit-Euler stability bound."""


@dataclass(frozen=True)
class FdmConfig:
    """Finite-difference run settings.

    Attributes:
        dt: time step in seconds (baseline default 1e-2)
        record_stride: one recorded sample every `record_stride` steps

    Light switch times are quantized to the step grid, so signals should
    use switch times that are multiples of dt.
    """

    dt: float = 1e-2
    record_stride: int = 10

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.record_stride < 1 or self.record_stride != int(self.record_stride):
            raise ValueError("record_stride must be a positive integer")

    def check_stability(self, spec: VesicleSpec, kin: KineticConstants,
                        env: Environment,
                        rates: DerivedRates | None = None) -> float:
        """Raise FdmStabilityError unless dt * a_max < 1; returns a_max."""
        if rates is None:
            rates = derive_rates(spec, kin, env)
        a_max = stability_coefficient(spec, kin, env, rates)
        if self.dt * a_max >= 1.0:
            raise FdmStabilityError(
                f"dt={self.dt:g} s is unstable for the stiffest phase "
                f"coefficient {a_max:.4g} 1/s (dt*a={self.dt * a_max:.3g}); "
                f"use dt < {1.0 / a_max:.3g} s")
        return a_max


def stability_coefficient(spec: VesicleSpec, kin: KineticConstants,
                          env: Environment, rates: DerivedRates) -> float:
    """Fastest relaxation rate (1/s) any phase can exhibit.

    The proton coefficient is the unbuffered rate divided by the smallest
    buffering slowdown along the reachable concentration range; the
    substrate adds its own Michaelis-Menten bound.
    """
    c_max = max(env.c_h_in0, env.c_h_out0)
    if rates.leak_rate > 0:
        c_max = max(c_max, env.c_h_out0 + rates.pump_rate / rates.leak_rate)
    slow = buffering_slowdown(c_max, env.buffer_total, env.k_a)
    a_h = rates.leak_rate * (1.0 / spec.v_in + 1.0 / env.v_out)
    if rates.pump_rate > 0 and env.c_h_out0 > 0:
        a_h += rates.pump_rate / (env.v_out * env.c_h_out0)
    a = a_h / slow
    if rates.symport_rate_substrate > 0:
        a = max(a, rates.symport_rate_substrate / (spec.v_in * kin.k_m))
    return a


def stable_dt(spec: VesicleSpec, kin: KineticConstants, env: Environment,
              margin: float = 0.5) -> float:
    """A round-number dt satisfying dt * a_max <= margin."""
    rates = derive_rates(spec, kin, env)
    a_max = stability_coefficient(spec, kin, env, rates)
    limit = margin / a_max
    exp = math.floor(math.log10(limit))
    for mant in (5.0, 2.0, 1.0):
        dt = mant * 10.0 ** exp
        if dt <= limit:
            return dt
    return 10.0 ** exp


def _light_steps(signal: LightSignal, dt: float, n_steps: int) -> np.ndarray:
    """Per-step illumination flags on the step grid."""
    light = np.zeros(n_steps, dtype=bool)
    for t_on, t_off in signal.intervals:
        k_on = int(round(t_on / dt))
        k_off = int(round(t_off / dt))
        light[min(k_on, n_steps):min(k_off, n_steps)] = True
    return light


def step_svs(state, spec: VesicleSpec, rates: DerivedRates,
             kin: KineticConstants, env: Environment, light_on: bool,
             dt: float):
    """One forward-Euler step of a single vesicle system.

    Compartment totals are advanced with fluxes evaluated at the free
    concentrations of `state`, then both compartments re-equilibrate.
    Total H+ (free + complexed) is conserved exactly by construction;
    substrate overshoot below zero is clamped. The bulk integrator in
    `simulate_svs` performs these identical updates in its inner loop.

    Args:
        state: a SystemState with free concentrations and, when buffered,
            the complexed concentrations of both compartments
    Returns:
        The advanced SystemState at state.t + dt.
    """
    from .model import SystemState, net_proton_inflow, symport_flux

    b0, k_a = env.buffer_total, env.k_a
    th_in = (state.c_h_in + state.c_hb_in) * spec.v_in
    th_out = (state.c_h_out + state.c_hb_out) * env.v_out
    f_s, _ = symport_flux(state, rates, kin)
    net_in = net_proton_inflow(state, spec, rates, kin, env, light_on)

    th_in += dt * net_in
    th_out -= dt * net_in
    cs_in = max(state.c_s_in - dt * f_s / spec.v_in, 0.0)

    t_in = th_in / spec.v_in
    t_out = th_out / env.v_out
    c_in = free_proton_conc(t_in, b0, k_a)
    c_out = free_proton_conc(t_out, b0, k_a)
    return SystemState(t=state.t + dt, c_h_in=c_in, c_s_in=cs_in,
                       c_h_out=c_out, c_hb_in=t_in - c_in,
                       c_hb_out=t_out - c_out)


def simulate_svs(spec: VesicleSpec, kin: KineticConstants, env: Environment,
                 signal: LightSignal, cfg: FdmConfig | None = None,
                 rates: DerivedRates | None = None) -> Trajectory:
    """Ground-truth trajectory of a single vesicle system."""
    cfg = cfg or FdmConfig()
    if rates is None:
        rates = derive_rates(spec, kin, env)
    cfg.check_stability(spec, kin, env, rates)

    dt = cfg.dt
    n_steps = int(round(signal.horizon / dt))
    light = _light_steps(signal, dt, n_steps)
    stride = cfg.record_stride

    v_in, v_out = spec.v_in, env.v_out
    b0, k_a, km = env.buffer_total, env.k_a, kin.k_m
    gamma_p, gamma_l = rates.pump_rate, rates.leak_rate
    gamma_s, gamma_h = rates.symport_rate_substrate, rates.symport_rate_proton
    c_switch = rates.switch_conc
    c_out0 = env.c_h_out0
    sign = spec.flux_sign
    dep_threshold = DEPLETION_FRACTION_OF_KM * km

    th_in = total_conc_from_free(env.c_h_in0, b0, k_a) * v_in
    th_out = total_conc_from_free(env.c_h_out0, b0, k_a) * v_out
    h_total0 = th_in + th_out
    cs_in = env.c_s_in0
    ts_out = 0.0
    s_total0 = cs_in * v_in

    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    rec_t = np.empty(n_rec)
    rec_chin = np.empty(n_rec)
    rec_chout = np.empty(n_rec)
    rec_csin = np.empty(n_rec)
    rec_csout = np.empty(n_rec)
    rec_hbin = np.empty(n_rec)
    rec_hbout = np.empty(n_rec)
    rec_light = np.empty(n_rec, dtype=int)

    crossings: list[tuple[float, int]] = []
    events: list[Event] = []
    depleted = False
    max_h_drift = 0.0
    max_s_drift = 0.0

    c_in = free_proton_conc(th_in / v_in, b0, k_a)
    c_out = free_proton_conc(th_out / v_out, b0, k_a)
    diff_prev = c_in - c_switch
    active_at_start = diff_prev >= 0.0

    ri = 0
    for k in range(n_steps + 1):
        if k % stride == 0 or k == n_steps:
            idx = min(ri, n_rec - 1)
            rec_t[idx] = k * dt
            rec_chin[idx] = c_in
            rec_chout[idx] = c_out
            rec_csin[idx] = cs_in
            rec_csout[idx] = ts_out / v_out
            rec_hbin[idx] = th_in / v_in - c_in
            rec_hbout[idx] = th_out / v_out - c_out
            rec_light[idx] = 1 if (k < n_steps and light[k]) else 0
            ri += 1
        if k == n_steps:
            break

        lit = light[k]
        pump = gamma_p * (c_out / c_out0) if (lit and gamma_p > 0.0
                                              and c_out0 > 0.0) else 0.0
        if c_in >= c_switch and cs_in > 0.0 and gamma_s > 0.0:
            mm = cs_in / (cs_in + km)
            f_s = gamma_s * mm
            f_h = gamma_h * mm
        else:
            f_s = 0.0
            f_h = 0.0
        leak = gamma_l * (c_in - c_out)
        net_in = sign * (pump - leak - f_h)

        d_h = dt * net_in
        th_in += d_h
        th_out -= d_h
        if f_s > 0.0:
            released = dt * f_s
            cs_in -= released / v_in
            ts_out += released
            if cs_in < 0.0:
                ts_out += cs_in * v_in  # return the overshoot
                cs_in = 0.0
                if not depleted:
                    events.append(Event("depletion", (k + 1) * dt,
                                        "substrate clamped at 0"))
                    depleted = True

        c_in = free_proton_conc(th_in / v_in, b0, k_a)
        c_out = free_proton_conc(th_out / v_out, b0, k_a)

        diff = c_in - c_switch
        if (diff >= 0.0) != (diff_prev >= 0.0):
            frac = diff_prev / (diff_prev - diff)
            crossings.append((k * dt + frac * dt, 1 if diff >= 0.0 else -1))
        diff_prev = diff

        if not depleted and cs_in < dep_threshold:
            events.append(Event("depletion", (k + 1) * dt,
                                "fell below reporting threshold"))
            depleted = True

        if k % 1000 == 0:
            max_h_drift = max(max_h_drift,
                              abs(th_in + th_out - h_total0) / h_total0)
            if s_total0 > 0:
                max_s_drift = max(max_s_drift,
                                  abs(cs_in * v_in + ts_out - s_total0)
                                  / s_total0)

    max_h_drift = max(max_h_drift, abs(th_in + th_out - h_total0) / h_total0)
    if s_total0 > 0:
        max_s_drift = max(max_s_drift,
                          abs(cs_in * v_in + ts_out - s_total0) / s_total0)

    sched = schedule_from_crossings(signal, crossings, active_at_start)
    cycles, phases = sched.annotate(rec_t)
    return Trajectory(
        t=rec_t, c_h_in=rec_chin, c_h_out=rec_chout, c_s_in=rec_csin,
        c_s_out=rec_csout, light=rec_light,
        cycle=np.asarray(cycles, dtype=int), phase=phases, schedule=sched,
        solver="fdm", derived=rates, events=events,
        c_hb_in=rec_hbin, c_hb_out=rec_hbout,
        conservation_drift=max(max_h_drift, max_s_drift),
    )


@dataclass
class SharedPoolResult:
    """Multi-vesicle run against one common extravesicular pool.

    Attributes:
        trajectories: per-vesicle trajectories; their C_H_out column holds
            the shared pool concentration, while C_S_out is the vesicle's
            own release scaled to its volume allotment
        t: shared sample times
        pooled_c_h_out / pooled_c_s_out: pool concentrations (mol/m^3)
        conservation_drift: max relative inventory drift over the run
    """

    trajectories: list[Trajectory]
    t: np.ndarray
    pooled_c_h_out: np.ndarray
    pooled_c_s_out: np.ndarray
    conservation_drift: float


def simulate_mvs_shared_pool(specs: list[VesicleSpec], kin: KineticConstants,
                             env_total: Environment, signal: LightSignal,
                             cfg: FdmConfig | None = None) -> SharedPoolResult:
    """Step all vesicles against one shared extravesicular compartment.

    `env_total.v_out` is the pool volume available to the modeled
    vesicles; every vesicle's nominal allotment (used for its threshold
    concentration and its per-SVS output scaling) is v_out / len(specs).
    This run violates vesicle independence on purpose: it is the baseline
    against which the independent-compartment approximation is judged.
    """
    if not specs:
        raise ValueError("need at least one vesicle")
    cfg = cfg or FdmConfig()
    n_ves = len(specs)
    v_pool = env_total.v_out
    env_alloc = dataclasses.replace(env_total, v_out=v_pool / n_ves)

    rates = [derive_rates(s, kin, env_alloc) for s in specs]
    for s, r in zip(specs, rates):
        cfg.check_stability(s, kin, env_alloc, r)

    dt = cfg.dt
    n_steps = int(round(signal.horizon / dt))
    light = _light_steps(signal, dt, n_steps)
    stride = cfg.record_stride
    b0, k_a, km = env_total.buffer_total, env_total.k_a, kin.k_m
    c_out0 = env_total.c_h_out0

    v_in = np.array([s.v_in for s in specs])
    sign = np.array([s.flux_sign for s in specs])
    gamma_p = np.array([r.pump_rate for r in rates])
    gamma_l = np.array([r.leak_rate for r in rates])
    gamma_s = np.array([r.symport_rate_substrate for r in rates])
    gamma_h = np.array([r.symport_rate_proton for r in rates])
    c_switch = np.array([r.switch_conc for r in rates])

    th_in = np.full(n_ves, total_conc_from_free(env_total.c_h_in0, b0, k_a)) * v_in
    pool_th = total_conc_from_free(c_out0, b0, k_a) * v_pool
    cs_in = np.full(n_ves, env_total.c_s_in0)
    pool_ts = 0.0
    h_total0 = th_in.sum() + pool_th
    s_total0 = (cs_in * v_in).sum()

    def free_vec(total_conc: np.ndarray) -> np.ndarray:
        if b0 <= 0.0:
            return np.maximum(total_conc, 0.0)
        q = b0 + k_a - total_conc
        disc = np.sqrt(q * q + 4.0 * k_a * total_conc)
        pos = 2.0 * k_a * total_conc / (q + disc)
        neg = 0.5 * (disc - q)
        out = np.where(q >= 0.0, pos, neg)
        return np.where(total_conc > 0.0, out, 0.0)

    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    rec_t = np.empty(n_rec)
    rec_chin = np.empty((n_rec, n_ves))
    rec_csin = np.empty((n_rec, n_ves))
    rec_pool_h = np.empty(n_rec)
    rec_pool_s = np.empty(n_rec)
    rec_light = np.empty(n_rec, dtype=int)

    crossings: list[list[tuple[float, int]]] = [[] for _ in range(n_ves)]
    events: list[list[Event]] = [[] for _ in range(n_ves)]
    depleted = np.zeros(n_ves, dtype=bool)
    dep_threshold = DEPLETION_FRACTION_OF_KM * km

    c_in = free_vec(th_in / v_in)
    c_pool = free_proton_conc(pool_th / v_pool, b0, k_a)
    diff_prev = c_in - c_switch
    active_at_start = diff_prev >= 0.0
    drift = 0.0

    ri = 0
    for k in range(n_steps + 1):
        if k % stride == 0 or k == n_steps:
            idx = min(ri, n_rec - 1)
            rec_t[idx] = k * dt
            rec_chin[idx] = c_in
            rec_csin[idx] = cs_in
            rec_pool_h[idx] = c_pool
            rec_pool_s[idx] = pool_ts / v_pool
            rec_light[idx] = 1 if (k < n_steps and light[k]) else 0
            ri += 1
        if k == n_steps:
            break

        lit = light[k]
        pump = gamma_p * (c_pool / c_out0) if (lit and c_out0 > 0) else 0.0
        active = (c_in >= c_switch) & (cs_in > 0.0) & (gamma_s > 0.0)
        mm = np.where(active, cs_in / (cs_in + km), 0.0)
        f_s = gamma_s * mm
        f_h = gamma_h * mm
        leak = gamma_l * (c_in - c_pool)
        net_in = sign * (pump - leak - f_h)

        th_in += dt * net_in
        pool_th -= dt * net_in.sum()
        released = dt * f_s
        cs_in -= released / v_in
        pool_ts += released.sum()
        under = cs_in < 0.0
        if under.any():
            pool_ts += (cs_in[under] * v_in[under]).sum()
            for v in np.nonzero(under & ~depleted)[0]:
                events[v].append(Event("depletion", (k + 1) * dt,
                                       "substrate clamped at 0"))
            depleted |= under
            cs_in[under] = 0.0

        c_in = free_vec(th_in / v_in)
        c_pool = free_proton_conc(pool_th / v_pool, b0, k_a)

        diff = c_in - c_switch
        flipped = (diff >= 0.0) != (diff_prev >= 0.0)
        if flipped.any():
            for v in np.nonzero(flipped)[0]:
                frac = diff_prev[v] / (diff_prev[v] - diff[v])
                crossings[v].append((k * dt + frac * dt,
                                     1 if diff[v] >= 0.0 else -1))
        diff_prev = diff

        newly_low = (~depleted) & (cs_in < dep_threshold)
        if newly_low.any():
            for v in np.nonzero(newly_low)[0]:
                events[v].append(Event("depletion", (k + 1) * dt,
                                       "fell below reporting threshold"))
            depleted |= newly_low

        if k % 1000 == 0:
            drift = max(drift,
                        abs(th_in.sum() + pool_th - h_total0) / h_total0)
            if s_total0 > 0:
                drift = max(drift, abs((cs_in * v_in).sum() + pool_ts
                                       - s_total0) / s_total0)

    drift = max(drift, abs(th_in.sum() + pool_th - h_total0) / h_total0)
    if s_total0 > 0:
        drift = max(drift,
                    abs((cs_in * v_in).sum() + pool_ts - s_total0) / s_total0)

    v_alloc = v_pool / n_ves
    trajectories = []
    for v, (s, r) in enumerate(zip(specs, rates)):
        sched = schedule_from_crossings(signal, crossings[v],
                                        bool(active_at_start[v]))
        cyc, ph = sched.annotate(rec_t)
        released_conc = (env_total.c_s_in0 - rec_csin[:, v]) * s.v_in / v_alloc
        trajectories.append(Trajectory(
            t=rec_t, c_h_in=rec_chin[:, v].copy(), c_h_out=rec_pool_h.copy(),
            c_s_in=rec_csin[:, v].copy(), c_s_out=released_conc,
            light=rec_light.copy(), cycle=np.asarray(cyc, dtype=int),
            phase=ph, schedule=sched, solver="fdm", derived=r,
            events=events[v], conservation_drift=drift,
        ))
    return SharedPoolResult(
        trajectories=trajectories, t=rec_t, pooled_c_h_out=rec_pool_h,
        pooled_c_s_out=rec_pool_s, conservation_drift=drift,
    )
