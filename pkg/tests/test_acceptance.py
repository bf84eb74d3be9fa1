"""Acceptance gate: one test per criterion, at the stated tolerances.

Run with `pytest -v tests/test_acceptance.py` to get one pass/fail line
per criterion. Shared scenario runs live in session fixtures; each
criterion asserts its own runtime budget on top of its substance.

Two legs are known-red against the reference dynamics and are asserted
anyway rather than loosened:

  * criterion 2: the 20 mol/m^3 buffer curve is still ~3.3% away from
    the pump/leak equilibrium after 600 s of illumination (the system's
    buffered time constant is ~300 s, so 2% needs ~790 s);
  * criterion 4: the per-phase frozen buffer attenuation shifts analytic
    symport times by O(0.1-0.6 s) against the finite-difference
    crossings, which cannot meet a 2*dt = 0.02 s bound.
"""

import dataclasses
import math
import time

import numpy as np
import pytest
from scipy import stats

from vesim.analytic import lambert_w0, run_analytic
from vesim.ensemble import (EnsembleConfig, PopulationDistributions,
                            jensen_gap_check, protein_slots, run_ensemble)
from vesim.fdm import (FdmConfig, FdmStabilityError, simulate_svs, stable_dt)
from vesim.model import (default_environment, default_kinetics,
                         default_vesicle, derive_rates)
from vesim.presets import (FIG4_EXPECTED_TYPES, fig3_scenario, fig4_scenario,
                           fig5_scenario, fig9_scenario)
from vesim.runner import execute_run
from vesim.schedule import LightSignal
from vesim.sweep import fig6_sweep, fig10_sweep, fig11_sweep, run_sweep

C_EQ_REFERENCE = 5.58e-5  # mol/m^3, pump/leak balance at table defaults


def _timed(fn):
    t0 = time.monotonic()
    out = fn()
    return out, time.monotonic() - t0


@pytest.fixture(scope="session")
def fig3_runs():
    scenario = fig3_scenario()
    results, elapsed = _timed(lambda: {
        cfg.label: execute_run(cfg)["trajectories"]
        for cfg in scenario.runs})
    return results, elapsed


@pytest.fixture(scope="session")
def fig4_runs():
    (cfg,) = fig4_scenario().runs
    return _timed(lambda: execute_run(cfg)["trajectories"])


@pytest.fixture(scope="session")
def fig5_runs():
    (cfg,) = fig5_scenario().runs
    return _timed(lambda: execute_run(cfg)["trajectories"])


@pytest.fixture(scope="session")
def fig9_run():
    (cfg,) = fig9_scenario().runs
    return _timed(lambda: execute_run(cfg))


def test_criterion_01_solver_cross_validation_unbuffered():
    t0 = time.monotonic()
    spec = dataclasses.replace(default_vesicle(), n_sym=0)
    env = default_environment(buffer_total=0.0)
    kin = default_kinetics()
    sig = LightSignal([(0.0, 600.0)], 1200.0)

    # the baseline 1e-2 s step is provably unstable here and the solver
    # must refuse it; the cross-validation then runs at the largest
    # stable round step (see decisions ledger on this spec conflict)
    with pytest.raises(FdmStabilityError):
        FdmConfig(dt=1e-2).check_stability(spec, kin, env)
    dt = stable_dt(spec, kin, env)
    fdm = simulate_svs(spec, kin, env, sig,
                       FdmConfig(dt=dt, record_stride=round(0.1 / dt)))
    errs = {}
    for mode in ("closed", "exact"):
        ana = run_analytic(spec, kin, env, sig, mode, sample_interval=0.1)
        errs[mode] = float(np.max(np.abs(ana.c_h_in - fdm.c_h_in)
                                  / fdm.c_h_in))
    elapsed = time.monotonic() - t0
    print(f"\n[criterion 1] max rel err vs FDM(dt={dt:g}): {errs}, "
          f"runtime {elapsed:.2f}s")
    assert errs["closed"] < 1e-3
    assert errs["exact"] < 1e-3
    assert elapsed < 5.0


def test_criterion_02_equilibrium_invariance(fig3_runs):
    results, elapsed = fig3_runs
    rates = derive_rates(dataclasses.replace(default_vesicle(), n_sym=0),
                         default_kinetics(), default_environment())
    c_eq = default_environment().c_h_out0 + rates.pump_rate / rates.leak_rate
    assert c_eq == pytest.approx(C_EQ_REFERENCE, rel=1e-3)
    devs = {}
    for label, trajs in results.items():
        fdm = trajs["fdm"]
        k = int(np.argmin(np.abs(fdm.t - 600.0)))
        devs[label] = abs(fdm.c_h_in[k] - c_eq) / c_eq
    print(f"\n[criterion 2] terminal deviation from C_eq: "
          f"{ {k: f'{v:.3%}' for k, v in devs.items()} }, "
          f"runtime {elapsed:.2f}s")
    assert elapsed < 20.0
    assert devs["B0=100"] > 0.02  # too slow to equilibrate in 600 s
    for label in ("B0=0", "B0=10", "B0=20"):
        assert devs[label] <= 0.02, (
            f"{label} ended {devs[label]:.2%} from C_eq; the buffered time "
            "constant (~300 s at B0=20) cannot reach 2% within 600 s -- "
            "see the decisions ledger")


def test_criterion_03_buffer_slope_ordering(fig3_runs):
    results, elapsed = fig3_runs
    order = ["B0=0", "B0=10", "B0=20", "B0=100"]
    slopes = {}
    for solver in ("fdm", "closed"):
        slopes[solver] = [
            abs(results[lbl][solver].c_h_in[1] - results[lbl][solver].c_h_in[0])
            / (results[lbl][solver].t[1] - results[lbl][solver].t[0])
            for lbl in order]
    print(f"\n[criterion 3] |dC/dt| at 0+: fdm={slopes['fdm']}, "
          f"closed={slopes['closed']}, runtime {elapsed:.2f}s")
    for solver in ("fdm", "closed"):
        s = slopes[solver]
        assert all(a > b for a, b in zip(s, s[1:])), solver
    assert elapsed < 20.0


def test_criterion_04_cycle_type_machinery(fig4_runs):
    trajs, elapsed = fig4_runs
    fdm = trajs["fdm"]
    for solver, traj in trajs.items():
        assert traj.schedule.types() == FIG4_EXPECTED_TYPES, solver
    t, cs = fdm.t, fdm.c_s_out
    b_cycle = fdm.schedule.cycles[0]
    in_b = (t >= b_cycle.t1) & (t <= b_cycle.t4)
    assert np.allclose(cs[in_b], cs[in_b][0], rtol=1e-12, atol=1e-30)
    for lo, hi in fdm.schedule.symport_intervals():
        seg = cs[(t > lo) & (t <= hi)]
        assert np.all(np.diff(seg) > 0)
    dt = 1e-2
    devs = {
        solver: max(max(abs(cf.t2 - ca.t2), abs(cf.t4 - ca.t4))
                    for cf, ca in zip(fdm.schedule.cycles,
                                      trajs[solver].schedule.cycles))
        for solver in ("exact", "closed")}
    print(f"\n[criterion 4] types {fdm.schedule.types()}, crossing "
          f"deviations {devs} vs bound {2 * dt}, runtime {elapsed:.2f}s")
    assert elapsed < 10.0
    for solver, dev in devs.items():
        assert dev <= 2 * dt, (
            f"{solver} symport times deviate {dev:.3f}s from the FDM "
            "crossings; the frozen per-phase attenuation factor makes a "
            "0.02 s bound unreachable -- see the decisions ledger")


def test_criterion_05_depletion_capture():
    # The criterion pins only the cargo load and the pump/symporter
    # ratio. It is checked unbuffered: there the solvers differ solely in
    # their treatment of the Michaelis-Menten term, which is exactly what
    # the 2%/5% pair discriminates, and the tail comparison is not
    # confounded by the shared frozen-attenuation approximation (see the
    # decisions ledger). The buffered variant ships as the fig5 preset.
    t0 = time.monotonic()
    kin = default_kinetics()
    spec = dataclasses.replace(default_vesicle(), n_pumps=35, n_sym=35)
    env = default_environment(buffer_total=0.0, c_s_in0=3.14)
    sig = LightSignal([(1200.0 * i, 1200.0 * i + 600.0) for i in range(7)],
                      8400.0)
    dt = stable_dt(spec, kin, env)
    fdm = simulate_svs(spec, kin, env, sig,
                       FdmConfig(dt=dt, record_stride=round(0.5 / dt)))
    exact = run_analytic(spec, kin, env, sig, "exact", sample_interval=0.5)
    closed = run_analytic(spec, kin, env, sig, "closed",
                          sample_interval=0.5)
    t_dep = fdm.depletion_time()
    floor = 1e-6 * env.c_s_in0  # six decades of resolved tail
    f = fdm.c_s_in
    err_exact = float(np.max(np.abs(exact.c_s_in - f) / np.maximum(f, floor)))
    err_closed = float(np.max(np.abs(closed.c_s_in - f) / np.maximum(f, floor)))
    elapsed = time.monotonic() - t0
    print(f"\n[criterion 5] FDM depletion at {t_dep:.0f}s; pointwise rel "
          f"err: exact {err_exact:.3%}, closed {err_closed:.1%}, "
          f"runtime {elapsed:.1f}s")
    assert t_dep is not None and 6000.0 <= t_dep <= 7000.0
    assert err_exact < 0.02
    assert err_closed > 0.05  # the documented linearization failure
    assert elapsed < 60.0


def test_criterion_06_symport_duration_linearity():
    result, elapsed = _timed(lambda: run_sweep(fig6_sweep()))
    assert result.summary["failed"] == 0
    base = result.summary["combos"]["gamma_sym=0.006,g_l=3e-06"]
    rows = [r for r in result.rows if "error" not in r]

    def dur(g_sym, g_l, d):
        return [r["symport_duration_closed"] for r in rows
                if r["symport_rate"] == g_sym and r["permeability"] == g_l
                and r["duration"] == d][0]

    durations = sorted({r["duration"] for r in rows})
    dec_sym = all(dur(0.005, 3e-6, d) >= dur(0.006, 3e-6, d)
                  >= dur(0.008, 3e-6, d) for d in durations)
    dec_leak = all(dur(0.006, 3e-6, d) >= dur(0.006, 5e-6, d)
                   >= dur(0.006, 1e-5, d) for d in durations)
    print(f"\n[criterion 6] R2={base['linear_fit_r2']:.5f}, min "
          f"illumination {base['min_illumination_time']:.1f}s, decreasing "
          f"in symport rate: {dec_sym}, in permeability: {dec_leak}, "
          f"runtime {elapsed:.2f}s")
    assert base["linear_fit_r2"] > 0.99
    assert dec_sym and dec_leak
    assert elapsed < 60.0


def test_criterion_07_lambert_w_correctness():
    t0 = time.monotonic()
    assert lambert_w0(0.0) == pytest.approx(0.0, abs=1e-14)
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
    xs = np.concatenate([
        [-1.0 / math.e + 1e-9],
        -(10.0 ** np.linspace(-9, math.log10(1 / math.e - 1e-9), 200)),
        [0.0],
        10.0 ** np.linspace(-12, 6, 600),
    ])
    w = lambert_w0(xs)
    resid = np.abs(w * np.exp(w) - xs)
    bound = 1e-12 * np.maximum(1.0, np.abs(xs))
    elapsed = time.monotonic() - t0
    print(f"\n[criterion 7] max residual ratio "
          f"{np.max(resid / bound):.3g} over {len(xs)} points, "
          f"runtime {elapsed:.2f}s")
    assert np.all(resid <= bound)
    assert elapsed < 1.0


def test_criterion_08_conservation(fig3_runs, fig4_runs, fig5_runs,
                                   fig9_run):
    drifts = {}
    for label, trajs in fig3_runs[0].items():
        drifts[f"fig3/{label}"] = trajs["fdm"].conservation_drift
    drifts["fig4"] = fig4_runs[0]["fdm"].conservation_drift
    drifts["fig5"] = fig5_runs[0]["fdm"].conservation_drift
    pool = fig9_run[0]["shared_pool"]
    drifts["fig9/shared_pool"] = pool.conservation_drift
    print(f"\n[criterion 8] max inventory drift: "
          f"{max(drifts.values()):.2e} ({drifts})")
    assert all(v < 1e-6 for v in drifts.values())


def test_criterion_09_sampling_fidelity():
    t0 = time.monotonic()
    pop = PopulationDistributions()
    assert protein_slots(117.67e-9, 14e-9, pop.rho) == 112
    rng = np.random.default_rng(20240817)
    n = 100_000
    d = pop.diameter.sample(rng, n)
    p_d = stats.kstest(d, pop.diameter.cdf).pvalue
    g = np.log10(pop.permeability.sample(rng, n))
    p_g = stats.kstest(g, pop.permeability.cdf_log10).pvalue
    n_tot, p_pump = 112, 4.0 / 7.0
    draws = rng.binomial(n_tot, p_pump, n)
    ks = np.arange(n_tot + 1)
    pmf = stats.binom.pmf(ks, n_tot, p_pump)
    keep = pmf * n >= 5.0
    f_obs = np.bincount(draws, minlength=n_tot + 1)[keep].astype(float)
    f_obs = np.append(f_obs, n - f_obs.sum())  # lump the sparse tails
    f_exp = np.append(pmf[keep] * n, n - pmf[keep].sum() * n)
    p_b = stats.chisquare(f_obs, f_exp).pvalue
    elapsed = time.monotonic() - t0
    print(f"\n[criterion 9] KS p: diameter {p_d:.3f}, permeability "
          f"{p_g:.3f}; chi2 p: protein split {p_b:.3f}; n_tot(117.67nm) "
          f"= 112; runtime {elapsed:.2f}s")
    assert p_d > 0.01 and p_g > 0.01 and p_b > 0.01
    assert elapsed < 10.0


def test_criterion_10_mean_parameter_bias():
    t0 = time.monotonic()
    pop = PopulationDistributions()
    kin = default_kinetics()
    sig = LightSignal([(0.0, 800.0)], 1600.0)
    ts = np.array([0.0, 800.0, 1600.0])
    wins = 0
    for rep in range(10):
        cfg = EnsembleConfig(n_mod=100, n_ex=10, seed=1000 + rep)
        env = default_environment(v_out=cfg.v_out_per_vesicle)
        res = run_ensemble(pop, kin, env, sig, cfg, sample_times=ts)
        ens_cs = res.value_at(res.interex_mean_c_s_out, 800.0)
        ref_cs = float(np.interp(800.0, res.mean_param_traj.t,
                                 res.mean_param_traj.c_s_out))
        wins += ens_cs > ref_cs
    # strict positivity of the two-point convexity gap, probed at the
    # Michaelis-Menten knee of the mean-parameter vesicle
    jsig = LightSignal([(0.0, 9500.0)], 10500.0)
    jenv = default_environment(v_out=EnsembleConfig().v_out_per_vesicle,
                               c_s_in0=3.14)
    gap = jensen_gap_check(pop, kin, jenv, jsig, t_probe=8950.0,
                           nsym_values=[20.0, 40.0])
    elapsed = time.monotonic() - t0
    print(f"\n[criterion 10] ensemble above mean-parameter reference in "
          f"{wins}/10 repetitions; two-point gap {gap.gap:.4g} "
          f"(E={gap.ensemble_mean:.4g} vs {gap.mean_param_value:.4g}), "
          f"runtime {elapsed:.1f}s")
    assert wins >= 9
    assert gap.status == "ok" and gap.gap > 0.0
    assert elapsed < 300.0


def test_criterion_11_variance_scaling():
    t0 = time.monotonic()
    pop = PopulationDistributions()
    kin = default_kinetics()
    sig = LightSignal([(0.0, 800.0)], 1600.0)
    ts = np.array([0.0, 800.0, 1600.0])
    variances = {}
    for n_mod in (10, 100, 1000):
        vals = []
        for rep in range(6):
            cfg = EnsembleConfig(n_mod=n_mod, n_ex=10, seed=7000 + rep)
            env = default_environment(v_out=cfg.v_out_per_vesicle)
            res = run_ensemble(pop, kin, env, sig, cfg, sample_times=ts)
            vals.append(res.interex_var_c_s_out[-1])
        variances[n_mod] = float(np.mean(vals))
    slope = np.polyfit(np.log10(list(variances)),
                       np.log10(list(variances.values())), 1)[0]
    elapsed = time.monotonic() - t0
    print(f"\n[criterion 11] terminal inter-experiment variance "
          f"{variances}, log-log slope {slope:.3f}, runtime {elapsed:.1f}s")
    assert variances[10] > variances[100] > variances[1000]
    assert -1.3 <= slope <= -0.7
    assert elapsed < 600.0


def test_criterion_12_sensitivity_orderings():
    (r10, e10) = _timed(lambda: run_sweep(fig10_sweep(seed=42)))
    (r11, e11) = _timed(lambda: run_sweep(fig11_sweep(seed=42)))
    assert r10.summary["failed"] == 0 and r11.summary["failed"] == 0
    rows10 = sorted([r for r in r10.rows if "error" not in r],
                    key=lambda r: r["d_mean_nm"])
    rows11 = sorted([r for r in r11.rows if "error" not in r],
                    key=lambda r: r["g_l_mean"])

    peaks = [r["peak_interex_mean_c_h_in"] for r in rows10]
    starts = [r["median_symport_start"] for r in rows10]
    lit_levels = [r["c_h_in_end_illumination"] for r in rows11]
    ends = [r["median_symport_end"] for r in rows11]
    spread10 = (max(r["terminal_interex_mean_c_s_out"] for r in rows10)
                - min(r["terminal_interex_mean_c_s_out"] for r in rows10))
    spread11 = (max(r["terminal_interex_mean_c_s_out"] for r in rows11)
                - min(r["terminal_interex_mean_c_s_out"] for r in rows11))
    ratio = spread10 / spread11
    print(f"\n[criterion 12] diameters: peaks {peaks}, starts {starts}; "
          f"permeabilities: lit C_H_in {lit_levels}, symport ends {ends}; "
          f"substrate spread ratio {ratio:.1f}x, runtime "
          f"{e10 + e11:.1f}s")
    assert peaks[0] > peaks[1] > peaks[2]
    assert starts[0] < starts[1] < starts[2]
    assert lit_levels[0] > lit_levels[1] > lit_levels[2]
    assert ends[0] > ends[1] > ends[2]
    assert ratio >= 10.0
    assert e10 + e11 < 600.0
