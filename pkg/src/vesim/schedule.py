# schedule.py
"""
Illumination cycles, cycle phases and symport start/end bookkeeping.

A cycle i spans one on/off illumination period and is delimited by four
monotone boundary times: t1 (pump start), t2 (symport start), t3 (pump
end), t4 (symport end). Phases P1 (leakage only), P2 (pumping), P3
(pumping + symport) and P4 (symport after light-off) fill the gaps
between them; zero-duration phases are skipped. Cycle types:

    a: regular cycle, t1 < t2 < t3 < t4
    b: illumination too short for symport,   t2 = t3 = t4
    c: symport bridges two cycles,           t4(i) = t1(i+1) = t2(i+1)

t1/t3 come from the light signal. t2/t4 are predicted by inverting the
closed-form proton solution and then clipped into their cycle so the
boundary sequences stay monotone and types b/c degenerate correctly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

NO_CROSSING = math.inf

PHASE_LEAK = "P1"
PHASE_PUMP = "P2"
PHASE_PUMP_SYMPORT = "P3"
PHASE_SYMPORT = "P4"


class ScheduleError(ValueError):
    """Raised for invalid light signals or unresolved schedule queries."""


@dataclass(frozen=True)
class LightSignal:
    """Binary piecewise-constant illumination schedule.

    Attributes:
        intervals: ordered (t_on, t_off) pairs in seconds, non-overlapping
        horizon: total simulated duration in seconds
    """

    intervals: tuple[tuple[float, float], ...]
    horizon: float

    def __init__(self, intervals, horizon: float):
        ivs = tuple((float(a), float(b)) for a, b in intervals)
        prev_off = -math.inf
        for k, (t_on, t_off) in enumerate(ivs):
            if not t_on < t_off:
                raise ScheduleError(
                    f"interval {k}: t_on ({t_on}) must be < t_off ({t_off})")
            if t_on < prev_off:
                raise ScheduleError(
                    f"interval {k}: overlaps or precedes the previous one")
            if t_on < 0:
                raise ScheduleError(f"interval {k}: negative t_on ({t_on})")
            prev_off = t_off
        if horizon <= 0:
            raise ScheduleError(f"horizon must be > 0, got {horizon}")
        if ivs and ivs[-1][1] > horizon:
            raise ScheduleError("last interval ends beyond the horizon")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "horizon", float(horizon))

    def is_on(self, t: float) -> bool:
        """l(t) as a boolean; intervals are closed-open [t_on, t_off)."""
        for t_on, t_off in self.intervals:
            if t_on <= t < t_off:
                return True
            if t < t_on:
                return False
        return False

    @property
    def n_cycles(self) -> int:
        return len(self.intervals)

    def cycle_bounds(self, i: int) -> tuple[float, float, float]:
        """(t1, t3, t1_next) of 0-based cycle i; t1_next is the horizon
        for the last cycle."""
        t1, t3 = self.intervals[i]
        t1_next = (self.intervals[i + 1][0]
                   if i + 1 < len(self.intervals) else self.horizon)
        return t1, t3, t1_next

    def switch_times(self) -> list[float]:
        out = []
        for t_on, t_off in self.intervals:
            out.extend((t_on, t_off))
        return out


@dataclass(frozen=True)
class CycleRecord:
    """Resolved boundary times of one cycle (seconds) and its type."""

    t1: float
    t2: float
    t3: float
    t4: float
    cycle_type: str

    def __post_init__(self):
        if not (self.t1 <= self.t2 <= self.t3 <= self.t4):
            raise ScheduleError(
                f"cycle boundaries not monotone: {self.t1}, {self.t2}, "
                f"{self.t3}, {self.t4}")

    @property
    def symport_duration(self) -> float:
        return self.t4 - self.t2


@dataclass
class CycleSchedule:
    """Fully resolved cycle boundaries for one trajectory.

    `resolved_until` marks how far in time the schedule is valid; phase
    queries beyond it raise, signalling that the solver must advance first.
    """

    cycles: list[CycleRecord] = field(default_factory=list)
    horizon: float = 0.0
    resolved_until: float = 0.0

    def append(self, rec: CycleRecord) -> None:
        if self.cycles and rec.t1 < self.cycles[-1].t4:
            raise ScheduleError("cycle starts before the previous one ends")
        self.cycles.append(rec)
        self.resolved_until = max(self.resolved_until, rec.t4, rec.t3)

    def boundaries(self) -> list[tuple[float, int, str]]:
        """All phase start times as (time, cycle index, phase) sorted in t.

        The phase named at time tb is the one *beginning* at tb; degenerate
        (zero-duration) phases are skipped.
        """
        out: list[tuple[float, int, str]] = []
        prev_end = 0.0
        for i, c in enumerate(self.cycles):
            for tb, te, phase in ((prev_end, c.t1, PHASE_LEAK),
                                  (c.t1, c.t2, PHASE_PUMP),
                                  (c.t2, c.t3, PHASE_PUMP_SYMPORT),
                                  (c.t3, c.t4, PHASE_SYMPORT)):
                if te > tb:
                    out.append((tb, i + 1, phase))
            prev_end = c.t4
        if self.horizon > prev_end:
            out.append((prev_end, len(self.cycles) + 1, PHASE_LEAK))
        return out

    def mark_resolved(self, t: float) -> None:
        self.resolved_until = max(self.resolved_until, t)

    def phase_at(self, t: float) -> tuple[int, str, float]:
        """(cycle index, phase, phase start time) of the phase containing t.

        Phase intervals are left-open, right-closed, so a boundary instant
        belongs to the phase that ends there; t = 0 maps to the opening
        leakage phase. 1-based cycle indices.
        """
        if t < 0 or t > self.horizon:
            raise ScheduleError(f"t={t} outside [0, {self.horizon}]")
        if t > self.resolved_until:
            raise ScheduleError(
                f"schedule resolved only up to t={self.resolved_until}; "
                f"advance the solver before querying t={t}")
        bounds = self.boundaries()
        if not bounds:
            return 1, PHASE_LEAK, 0.0
        starts = [b[0] for b in bounds]
        # start time strictly below t (left-open phases); t=0 -> first entry
        k = max(bisect.bisect_left(starts, t) - 1, 0)
        tb, cyc, phase = bounds[k]
        return cyc, phase, tb

    def annotate(self, times) -> tuple[list[int], list[str]]:
        """Cycle indices and phase labels for an ascending array of times."""
        bounds = self.boundaries()
        if not bounds:
            n = len(times)
            return [1] * n, [PHASE_LEAK] * n
        starts = [b[0] for b in bounds]
        cycles, phases = [], []
        for t in times:
            k = max(bisect.bisect_left(starts, t) - 1, 0)
            cycles.append(bounds[k][1])
            phases.append(bounds[k][2])
        return cycles, phases

    def types(self) -> list[str]:
        return [c.cycle_type for c in self.cycles]

    def symport_intervals(self) -> list[tuple[float, float]]:
        """Merged (t2, t4) intervals with zero-duration ones dropped."""
        out: list[tuple[float, float]] = []
        for c in self.cycles:
            if c.t4 > c.t2:
                if out and math.isclose(out[-1][1], c.t2, abs_tol=1e-12):
                    out[-1] = (out[-1][0], c.t4)
                else:
                    out.append((c.t2, c.t4))
        return out


def predict_threshold_crossing(c_start: float, c_target: float, a: float,
                               b_prime: float, t_prev: float) -> float:
    """Time at which the closed-form proton solution reaches c_target.

    The phase dynamics are C' = -a*C + b', i.e. exponential relaxation
    towards b'/a. Inverting for C(t) = c_target gives

        t = t_prev - (1/a) * [log(c_target - b'/a) - log(c_start - b'/a)].

    Returns NO_CROSSING when the target is on the far side of the
    asymptote (the log arguments differ in sign) or behind the start
    value in relaxation direction (negative delay).
    """
    if a <= 0.0:
        raise ScheduleError(f"phase coefficient a must be > 0, got {a}")
    if c_start == c_target:
        return t_prev
    s_inf = b_prime / a
    num = c_target - s_inf
    den = c_start - s_inf
    if num == 0.0 or den == 0.0 or (num > 0.0) != (den > 0.0):
        return NO_CROSSING
    ratio = num / den
    if ratio > 1.0:
        return NO_CROSSING  # crossing would lie in the past
    return t_prev - math.log(ratio) / a


def clip_cycle_times(t2_est: float, t4_est: float, t1: float, t3: float,
                     t1_next: float) -> tuple[float, float]:
    """Clip predicted symport times into their cycle.

    t2 is confined to [t1, t3] and t4 to [t3, t1_next]; estimates of
    NO_CROSSING collapse onto the upper clip bound. This reproduces the
    degenerate boundary patterns of type (b) (t2 = t3 = t4) and type (c)
    (t4 = t1_next) cycles.
    """
    if not (t1 <= t3 <= t1_next):
        raise ScheduleError(
            f"need t1 <= t3 <= t1_next, got {t1}, {t3}, {t1_next}")
    t2 = max(min(t3, t2_est), t1)
    t4 = max(min(t1_next, t4_est), t3)
    return t2, max(t4, t2)


def classify_cycle(t1: float, t2: float, t3: float, t4: float,
                   t1_next: float) -> str:
    """Cycle type from clipped boundary times.

    b: zero symport duration; c: symport glued to the next cycle or
    carried in from the previous one; a: otherwise.
    """
    if t4 <= t2:
        return "b"
    if t4 >= t1_next or t2 <= t1:
        return "c"
    return "a"


def schedule_from_crossings(signal: LightSignal,
                            crossings: list[tuple[float, int]],
                            active_at_start: bool = False) -> CycleSchedule:
    """Assemble a CycleSchedule from detected threshold crossings.

    Args:
        signal: the driving light signal
        crossings: (time, direction) pairs, direction +1 for upward
            (symport on) and -1 for downward, sorted in time
        active_at_start: whether the symport indicator is on at t=0

    The same clipping semantics as the analytical route apply: a new
    cycle begins at every t_on even if symport has not ended, and a cycle
    whose illumination never triggers symport degenerates to type (b).
    """
    sched = CycleSchedule(horizon=signal.horizon)
    events = sorted(crossings)

    def active_at(t: float) -> bool:
        act = active_at_start
        for tc, d in events:
            if tc > t:
                break
            act = d > 0
        return act

    for i in range(signal.n_cycles):
        t1, t3, t1_next = signal.cycle_bounds(i)
        if active_at(t1):
            t2_est = t1
        else:
            ups = [tc for tc, d in events if d > 0 and t1 <= tc < t3]
            t2_est = ups[0] if ups else NO_CROSSING
        if t2_est is NO_CROSSING or t2_est == NO_CROSSING:
            t2, t4 = t3, t3  # illumination never triggered symport: type (b)
        else:
            downs = [tc for tc, d in events
                     if d < 0 and t2_est < tc < t1_next]
            t4_est = downs[0] if downs else NO_CROSSING
            t2, t4 = clip_cycle_times(t2_est, t4_est, t1, t3, t1_next)
        sched.append(CycleRecord(t1, t2, t3, t4,
                                 classify_cycle(t1, t2, t3, t4, t1_next)))
    sched.mark_resolved(signal.horizon)
    return sched
