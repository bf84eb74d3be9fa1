# analytic.py
"""
Analytical solvers for the single-vesicle transport ODEs.

Two modes share one phase-by-phase engine:

  * exact  -- Lambert-W substrate law plus a variation-of-constants proton
              law whose integral is evaluated by adaptive quadrature;
  * closed -- linearized release flux, giving piecewise-linear substrate
              and a pure exponential proton relaxation per phase.

Within one cycle phase the proton ODE is C' = -a*C + b' with

    a  = j_l_a + j_p_a * 1{light}
    b  = j_l_b + j_p_b * 1{light}
    b' = b - (gamma_sym_h / v_in) * 1{symport active}   (closed form)

and j_l_a = gamma_l*(1/v_in + 1/v_out), j_p_a = gamma_p/(v_out*c_h_out0),
j_l_b = gamma_l*n_h/(v_in*v_out), j_p_b = j_p_a*n_h/v_in. A buffer is
folded in by dividing every proton-side coefficient by a per-phase
attenuation factor beta >= 1 frozen at the phase-start concentration;
the substrate rate is never attenuated.

Note the sign of j_l_b: it must be positive for the relaxation target
b/a to reproduce the pump/leak equilibrium and for the phase solution to
satisfy its own boundary condition C(t_sec) = C_start.

Symport start/end times are obtained by inverting the closed-form proton
law (the exact law is not invertible) and clipping them into the cycle;
this is done identically in both modes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import lambertw as _lambertw

from . import buffering
from .model import (DerivedRates, Environment, KineticConstants, ModelError,
                    VesicleSpec, derive_rates)
from .schedule import (CycleRecord, CycleSchedule, LightSignal,
                       classify_cycle, clip_cycle_times,
                       predict_threshold_crossing)
from .trajectory import Event, Trajectory, sample_grid

# Substrate level (fraction of K_M) below which the release module is
# reported as depleted; the Michaelis-Menten flux there is ~1% of maximum.
DEPLETION_FRACTION_OF_KM = 1e-2

_BRANCH_POINT = -math.exp(-1.0)
_EXP_SAFE = 700.0  # exp() overflow bound for float64


class LambertDomainError(ValueError):
    """Argument below -1/e, outside the real principal branch."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach tolerance.

    Attributes:
        estimate: the best value achieved before giving up
        abserr: the reported absolute error of that estimate
    """

    def __init__(self, msg: str, estimate: float, abserr: float):
        super().__init__(msg)
        self.estimate = estimate
        self.abserr = abserr


def lambert_w0(x):
    """Principal branch of the Lambert W function, w*exp(w) = x.

    Accepts scalars or arrays with x >= -1/e; one Halley step polishes
    the library value so the residual |w*e^w - x| stays within
    1e-12 * max(1, |x|).
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < _BRANCH_POINT):
        bad = arr[arr < _BRANCH_POINT]
        raise LambertDomainError(
            f"lambert_w0 needs x >= -1/e = {_BRANCH_POINT!r}; got {bad!r}")
    w = np.real(_lambertw(arr))
    # Halley refinement; skipped next to the branch point where the
    # correction denominator degenerates and the seed is already best.
    ew = np.exp(w)
    f = w * ew - arr
    denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
    safe = np.abs(w + 1.0) > 1e-6
    w = np.where(safe & (denom != 0.0), w - f / np.where(denom == 0, 1, denom), w)
    if np.isscalar(x) or arr.ndim == 0:
        return float(w)
    return w


def lambert_w0_exp(y):
    """W0(exp(y)) evaluated stably for any y, including y >> 700.

    For large y the defining relation becomes w + log(w) = y, solved by a
    Newton iteration seeded with the asymptotic y - log(y).
    """
    arr = np.asarray(y, dtype=float)
    out = np.empty_like(arr)
    small = arr <= _EXP_SAFE
    if np.any(small):
        out[small] = np.real(_lambertw(np.exp(arr[small])))
    big = ~small
    if np.any(big):
        yb = arr[big]
        w = yb - np.log(yb)
        for _ in range(4):
            w -= (w + np.log(w) - yb) / (1.0 + 1.0 / w)
        out[big] = w
    if np.isscalar(y) or arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class PhaseCoefficients:
    """Proton-ODE coefficients of one cycle phase, buffer-attenuated.

    The j_* fields are the unattenuated building blocks; `a`, `b` and
    `b_prime` assemble them for the phase's light/symport combination and
    divide by the frozen attenuation factor `beta`.
    """

    j_l_a: float
    j_p_a: float
    j_l_b: float
    j_p_b: float
    j_sym_b: float
    beta: float
    light: bool
    drain: bool

    @property
    def a(self) -> float:
        return (self.j_l_a + (self.j_p_a if self.light else 0.0)) / self.beta

    @property
    def b(self) -> float:
        return (self.j_l_b + (self.j_p_b if self.light else 0.0)) / self.beta

    @property
    def b_prime(self) -> float:
        return self.b + (self.j_sym_b / self.beta if self.drain else 0.0)

    @property
    def s_inf(self) -> float:
        """Relaxation target b'/a of the phase."""
        return self.b_prime / self.a


def phase_coefficients(spec: VesicleSpec, rates: DerivedRates,
                       env: Environment, light: bool, drain: bool,
                       beta: float = 1.0) -> PhaseCoefficients:
    """Assemble the proton coefficients for one phase.

    Args:
        light: illumination state of the phase
        drain: whether the symport H+ drain acts (threshold indicator on
            and substrate still available)
        beta: buffer attenuation factor frozen at the phase start
    """
    v_in, v_out = spec.v_in, env.v_out
    j_l_a = rates.leak_rate * (1.0 / v_in + 1.0 / v_out)
    if rates.pump_rate > 0.0 and env.c_h_out0 > 0.0:
        j_p_a = rates.pump_rate / (v_out * env.c_h_out0)
    else:
        j_p_a = 0.0
    n_h = rates.total_free_protons
    return PhaseCoefficients(
        j_l_a=j_l_a,
        j_p_a=j_p_a,
        j_l_b=rates.leak_rate * n_h / (v_in * v_out),
        j_p_b=j_p_a * n_h / v_in,
        j_sym_b=-(spec.flux_sign * rates.symport_rate_proton) / v_in,
        beta=beta,
        light=light,
        drain=drain,
    )


def closed_form_proton(c_start: float, coeffs: PhaseCoefficients, dt):
    """Exponential relaxation C = b'/a + (C_start - b'/a) * exp(-a*dt)."""
    s = coeffs.s_inf
    return s + (c_start - s) * np.exp(-coeffs.a * np.asarray(dt, dtype=float))


def closed_form_substrate(c_s_start: float, rates: DerivedRates,
                          spec: VesicleSpec, dt, drain: bool):
    """Linearized substrate law: constant, or a ramp clamped at zero."""
    dt = np.asarray(dt, dtype=float)
    if not drain:
        return np.full_like(dt, c_s_start)
    rate = rates.symport_rate_substrate / spec.v_in
    return np.maximum(c_s_start - rate * dt, 0.0)


def exact_substrate(c_s_start: float, rates: DerivedRates, spec: VesicleSpec,
                    kin: KineticConstants, dt, drain: bool = True):
    """Michaelis-Menten substrate law C_S = K_M * W0(f(dt)).

    f(dt) = (C0/K_M) * exp((C0 - (gamma_s/v_in)*dt) / K_M) is evaluated in
    the log domain so large C0/K_M ratios cannot overflow. Outside symport
    intervals the concentration is constant.
    """
    dt = np.asarray(dt, dtype=float)
    if not drain or c_s_start <= 0.0 or rates.symport_rate_substrate == 0.0:
        return np.full_like(dt, max(c_s_start, 0.0))
    k_m = kin.k_m
    y0 = math.log(c_s_start / k_m) + c_s_start / k_m
    decay = rates.symport_rate_substrate / (spec.v_in * k_m)
    return k_m * lambert_w0_exp(y0 - decay * dt)


def exact_depletion_offset(c_s_start: float, rates: DerivedRates,
                           spec: VesicleSpec, kin: KineticConstants,
                           threshold: float) -> float:
    """Time offset at which the exact substrate law reaches `threshold`."""
    if c_s_start <= threshold:
        return 0.0
    if rates.symport_rate_substrate == 0.0:
        return math.inf
    k_m = kin.k_m
    w = threshold / k_m
    y0 = math.log(c_s_start / k_m) + c_s_start / k_m
    return (y0 - w - math.log(w)) * spec.v_in * k_m / rates.symport_rate_substrate


def exact_proton_series(c_start: float, c_s_start: float,
                        coeffs: PhaseCoefficients, rates: DerivedRates,
                        spec: VesicleSpec, kin: KineticConstants,
                        offsets) -> np.ndarray:
    """Exact proton law at ascending offsets from the phase start.

    Without an active drain the variation-of-constants integral reduces
    algebraically to the closed form. With it, the integral is accumulated
    stepwise between consecutive offsets with the decaying exponential
    folded into the integrand, which keeps the evaluation stable for
    arbitrarily long phases:

        C(t+d) = C(t)*e^(-a d) + int_0^d g(u) e^(-a (d-u)) du,
        g(u) = b - (gamma_sym_h/(v_in*beta)) * W(f(u)) / (W(f(u)) + 1).
    """
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    a, b = coeffs.a, coeffs.b
    drain_coeff = -coeffs.j_sym_b / coeffs.beta  # gamma_sym_h/(v_in*beta)
    if not coeffs.drain or c_s_start <= 0.0 or drain_coeff == 0.0:
        return closed_form_proton(c_start, coeffs, offsets)

    k_m = kin.k_m
    y0 = math.log(c_s_start / k_m) + c_s_start / k_m
    decay = rates.symport_rate_substrate / (spec.v_in * k_m)

    def saturation(u):
        w = lambert_w0_exp(y0 - decay * u)
        return w / (w + 1.0)

    scale = abs(b) + drain_coeff
    out = np.empty_like(offsets)
    t_prev, c = 0.0, c_start
    for k, t_k in enumerate(offsets):
        d = t_k - t_prev
        if d > 0.0:
            lo = t_prev
            if a * d > 45.0:
                # The exponential weight kills contributions older than
                # ~45/a; the neglected remainder is below 1e-19 relative.
                lo = t_k - 45.0 / a
            val, abserr = quad(
                lambda u: (b - drain_coeff * saturation(u))
                * math.exp(-a * (t_k - u)),
                lo, t_k, epsabs=1e-12 * scale * d + 1e-300, epsrel=1e-8,
                limit=200, full_output=True)[:2]
            if abserr > max(1e-4 * scale * d, 1e-8 * abs(val)) + 1e-300:
                raise QuadratureError(
                    f"phase integral did not converge (abserr={abserr:g})",
                    estimate=c * math.exp(-a * d) + val, abserr=abserr)
            c = c * math.exp(-a * d) + val
        out[k] = c
        t_prev = t_k
    return out


@dataclass
class _Collector:
    """Accumulates sampled points while the phase engine advances."""

    grid: np.ndarray
    t: list = field(default_factory=list)
    c_h_in: list = field(default_factory=list)
    c_s_in: list = field(default_factory=list)
    light: list = field(default_factory=list)
    cursor: int = 0

    def take_points(self, t_end: float) -> np.ndarray:
        """Grid points with t_prev < t <= t_end (consumes them)."""
        start = self.cursor
        while (self.cursor < len(self.grid)
               and self.grid[self.cursor] <= t_end + 1e-12):
            self.cursor += 1
        return self.grid[start:self.cursor]

    def add(self, times, c_h, c_s, light: bool):
        self.t.extend(np.atleast_1d(times).tolist())
        self.c_h_in.extend(np.atleast_1d(c_h).tolist())
        self.c_s_in.extend(np.atleast_1d(c_s).tolist())
        self.light.extend([1 if light else 0] * np.atleast_1d(times).size)


class _PhaseEngine:
    """Chains cycle phases for one analytic run, exact or closed mode."""

    def __init__(self, spec: VesicleSpec, kin: KineticConstants,
                 env: Environment, rates: DerivedRates, mode: str,
                 collector: _Collector):
        if mode not in ("exact", "closed"):
            raise ModelError(f"mode must be 'exact' or 'closed', got {mode!r}")
        self.spec, self.kin, self.env, self.rates = spec, kin, env, rates
        self.mode = mode
        self.col = collector
        self.c_h = env.c_h_in0
        self.c_s = env.c_s_in0
        self.t = 0.0
        self.events: list[Event] = []
        self.depletion_threshold = DEPLETION_FRACTION_OF_KM * kin.k_m

    # -- phase-level helpers -------------------------------------------------

    def beta_now(self) -> float:
        return buffering.attenuation_factor(self.c_h, self.env.buffer_total,
                                            self.env.k_a)

    def coeffs(self, light: bool, drain: bool, beta: float) -> PhaseCoefficients:
        return phase_coefficients(self.spec, self.rates, self.env, light,
                                  drain, beta)

    def _drain_possible(self) -> bool:
        return (self.c_s > 0.0
                and self.rates.symport_rate_substrate > 0.0)

    def _record_depletion(self, t: float, how: str):
        if not any(ev.kind == "depletion" for ev in self.events):
            self.events.append(Event("depletion", t, how))

    def _run_segment(self, t_end: float, light: bool, indicator: bool,
                     beta: float) -> None:
        """Advance to t_end with constant light/indicator states.

        Splits internally when the closed-form substrate ramp hits zero;
        in exact mode the drain fades smoothly instead and only the
        reporting threshold generates an event.
        """
        while self.t < t_end - 1e-15:
            drain = indicator and self._drain_possible()
            seg_end = t_end
            if drain and self.mode == "closed":
                t_dep = self.t + self.spec.v_in * self.c_s / \
                    self.rates.symport_rate_substrate
                if t_dep <= self.t + 1e-15:  # residual cargo underflow
                    self.c_s = 0.0
                    self._record_depletion(self.t, "closed-form ramp reached 0")
                    continue
                if t_dep <= t_end:
                    seg_end = t_dep
            co = self.coeffs(light, drain, beta)
            self._emit(seg_end, co, drain)
            if drain and self.mode == "closed" and seg_end < t_end:
                self.c_s = 0.0
                self._record_depletion(seg_end, "closed-form ramp reached 0")
        self.t = max(self.t, t_end)

    def _emit(self, seg_end: float, co: PhaseCoefficients, drain: bool):
        """Evaluate one constant-coefficient segment and sample it."""
        pts = self.col.take_points(seg_end)
        offsets = pts - self.t
        end_offset = seg_end - self.t
        if self.mode == "exact":
            all_off = np.append(offsets, end_offset)
            c_h_all = exact_proton_series(self.c_h, self.c_s, co, self.rates,
                                          self.spec, self.kin, all_off)
            c_s_all = exact_substrate(self.c_s, self.rates, self.spec,
                                      self.kin, all_off, drain)
            if drain and self.c_s > self.depletion_threshold:
                d_off = exact_depletion_offset(self.c_s, self.rates,
                                               self.spec, self.kin,
                                               self.depletion_threshold)
                if d_off <= end_offset:
                    self._record_depletion(self.t + d_off,
                                           "fell below reporting threshold")
            c_h_pts, c_h_end = c_h_all[:-1], float(c_h_all[-1])
            c_s_pts, c_s_end = c_s_all[:-1], float(c_s_all[-1])
        else:
            c_h_pts = closed_form_proton(self.c_h, co, offsets)
            c_s_pts = closed_form_substrate(self.c_s, self.rates, self.spec,
                                            offsets, drain)
            c_h_end = float(closed_form_proton(self.c_h, co, end_offset))
            c_s_end = float(closed_form_substrate(self.c_s, self.rates,
                                                  self.spec, end_offset,
                                                  drain))
        if pts.size:
            self.col.add(pts, c_h_pts, c_s_pts, co.light)
        self.t = seg_end
        self.c_h, self.c_s = c_h_end, c_s_end

    # -- symport time prediction ---------------------------------------------

    def predict_symport_start(self, t_from: float, beta: float) -> float:
        """Upward threshold crossing under lit, symport-free dynamics."""
        if self.c_h >= self.rates.switch_conc:
            return t_from
        co = self.coeffs(light=True, drain=False, beta=beta)
        return predict_threshold_crossing(self.c_h, self.rates.switch_conc,
                                          co.a, co.b_prime, t_from)

    def predict_symport_end(self, t_from: float, beta: float) -> float:
        """Downward crossing in the dark, stepping over closed-form
        substrate depletion if it happens first."""
        if self.c_h < self.rates.switch_conc:
            return t_from
        c_h, c_s, t0 = self.c_h, self.c_s, t_from
        if c_s > 0.0 and self.rates.symport_rate_substrate > 0.0:
            co = self.coeffs(light=False, drain=True, beta=beta)
            t_dep = t0 + self.spec.v_in * c_s / self.rates.symport_rate_substrate
            tc = predict_threshold_crossing(c_h, self.rates.switch_conc,
                                            co.a, co.b_prime, t0)
            if tc <= t_dep:
                return tc
            c_h = float(closed_form_proton(c_h, co, t_dep - t0))
            t0 = t_dep
        co = self.coeffs(light=False, drain=False, beta=beta)
        return predict_threshold_crossing(c_h, self.rates.switch_conc,
                                          co.a, co.b_prime, t0)


def run_analytic(spec: VesicleSpec, kin: KineticConstants, env: Environment,
                 signal: LightSignal, mode: str = "closed",
                 sample_interval: float = 0.1,
                 sample_times=None,
                 rates: DerivedRates | None = None) -> Trajectory:
    """Phase-by-phase analytic trajectory of one vesicle.

    Each phase's terminal state seeds the next; symport start/end times
    come from the closed-form inversion in both modes, clipped into their
    cycles. The buffer enters through the per-phase attenuation factor.

    Args:
        mode: 'exact' or 'closed'
        sample_interval: uniform output spacing (s), ignored when
            `sample_times` is given
        sample_times: explicit ascending sample times in [0, horizon]
    """
    if spec.mode != "symporter":
        raise ModelError("analytic solvers support symporter mode only; "
                         "use the finite-difference solver for antiporters")
    if rates is None:
        rates = derive_rates(spec, kin, env)
    grid = (np.asarray(sample_times, dtype=float) if sample_times is not None
            else sample_grid(signal.horizon, sample_interval))

    col = _Collector(grid=grid)
    eng = _PhaseEngine(spec, kin, env, rates, mode, col)
    if grid.size and grid[0] == 0.0:
        col.add(0.0, eng.c_h, eng.c_s, signal.is_on(0.0))
        col.cursor = 1

    if eng.c_h >= rates.switch_conc:
        warnings.warn("initial H+ concentration already exceeds the symport "
                      "threshold; the opening leakage phase treats the "
                      "release module as inactive", stacklevel=2)

    sched = CycleSchedule(horizon=signal.horizon)
    for i in range(signal.n_cycles):
        t1, t3, t1_next = signal.cycle_bounds(i)
        if t1 > eng.t:  # P1: dark relaxation
            eng._run_segment(t1, light=False, indicator=False,
                             beta=eng.beta_now())
        beta2 = eng.beta_now()
        t2_est = eng.predict_symport_start(t1, beta2)
        t2 = max(min(t3, t2_est), t1)
        if t2 > eng.t:  # P2: pumping below threshold
            eng._run_segment(t2, light=True, indicator=False, beta=beta2)
        if t3 > eng.t:  # P3: pumping + symport
            eng._run_segment(t3, light=True, indicator=True,
                             beta=eng.beta_now())
        beta4 = eng.beta_now()
        t4_est = eng.predict_symport_end(t3, beta4)
        t2, t4 = clip_cycle_times(t2_est, t4_est, t1, t3, t1_next)
        if t4 > eng.t:  # P4: symport after light-off
            eng._run_segment(t4, light=False, indicator=True, beta=beta4)
        sched.append(CycleRecord(t1, t2, t3, t4,
                                 classify_cycle(t1, t2, t3, t4, t1_next)))
        sched.mark_resolved(t4)
    if signal.horizon > eng.t:  # trailing dark stretch
        eng._run_segment(signal.horizon, light=False, indicator=False,
                         beta=eng.beta_now())
    sched.mark_resolved(signal.horizon)

    t_arr = np.asarray(col.t)
    c_h_in = np.asarray(col.c_h_in)
    c_s_in = np.asarray(col.c_s_in)
    v_in, v_out = spec.v_in, env.v_out
    c_h_out = (rates.total_free_protons - c_h_in * v_in) / v_out
    c_s_out = (rates.total_substrate - c_s_in * v_in) / v_out
    cycles, phases = sched.annotate(t_arr)
    return Trajectory(
        t=t_arr, c_h_in=c_h_in, c_h_out=c_h_out, c_s_in=c_s_in,
        c_s_out=c_s_out, light=np.asarray(col.light, dtype=int),
        cycle=np.asarray(cycles, dtype=int), phase=phases,
        schedule=sched, solver=mode, derived=rates, events=eng.events,
    )
