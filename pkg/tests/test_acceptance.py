"""Acceptance experiments.  Each test prints one ``criterion N: PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear even
without ``-s``.  Statistical experiments use fixed seeds.
"""
import math
import os

import numpy as np
import pytest

from rrmaxwell import dsmc, kernels, metrics, steady
from rrmaxwell.kinematics import CollisionRule3D, TradeForm, trade_rule
from rrmaxwell.restitution import (Context, canonical_rho, deterministic, discrete,
                                   make_two_point)

E = 0.9
CANON_LAW = make_two_point(E, canonical_rho(E))
CANON = CollisionRule3D(E, CANON_LAW)
ZETA_CANON = 0.306893004115226  # 1 - A(2) for the canonical law, exact to 1e-15


def sym(base, h):
    """Symmetric two-atom law ``eta = +-h`` with probability 1/2 each (1D)."""
    return discrete(((-h, 0.5), (h, 0.5)), base, Context.ECONOMY1D)


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _report


def _random_conservative(rng):
    # e + eta then stays below about 5, where A(2) is O(1)
    e = float(rng.uniform(0.5, 0.999))
    rho = canonical_rho(e) * float(rng.uniform(1.0, 3.0))
    return e, make_two_point(e, rho)


# -- 1. kernel exactness -------------------------------------------------------------

def _criterion1_parts():
    rng = np.random.default_rng(101)
    s2_err = 0.0
    for _ in range(100):
        lam = float(rng.uniform(0.05, 0.95))
        h = float(rng.uniform(0.0, lam))
        form = TradeForm.GAIN if rng.random() < 0.5 else TradeForm.MIXING
        own = lam if form is TradeForm.GAIN else 1 - lam
        h = min(h, own)
        rule = trade_rule(lam, sym(own, h), form)
        s2 = kernels.kernel_S(2.0, rule).value
        s2_err = max(s2_err, abs(s2 - (2 * lam * (lam - 1) + h * h)))
    printed_err = reduced_err = quad_err = 0.0
    for _ in range(100):
        e, law = _random_conservative(rng)
        a2 = kernels.kernel_A(2.0, e, law).value
        printed_err = max(printed_err, abs(a2 - kernels.A2_printed_form(e, law)))
        reduced_err = max(reduced_err, abs(a2 - kernels.A2_reduced_form(e, law)))
        for alpha in (0.5, 1.0, 2.0):
            c = kernels.kernel_A(alpha, e, law).value
            q = kernels.kernel_A(alpha, e, law, kernels.Method.QUADRATURE).value
            quad_err = max(quad_err, abs(c - q))
    return s2_err, printed_err, reduced_err, quad_err


@pytest.fixture(scope="module")
def criterion1():
    return _criterion1_parts()


def test_criterion_1_attainable_parts(criterion1):
    s2_err, _, reduced_err, quad_err = criterion1
    assert s2_err < 1e-12
    assert reduced_err < 1e-10
    assert quad_err < 1e-9


@pytest.mark.xfail(strict=True, reason="the quoted (23 - e + <et^4>)/24 form of A(2) does not "
                   "match the kernel; the moment expansion (19 - 4e + <et^4>)/24 does "
                   "(see the decisions ledger)")
def test_criterion_1_kernel_exactness(criterion1, report):
    s2_err, printed_err, reduced_err, quad_err = criterion1
    ok = s2_err < 1e-12 and printed_err < 1e-10 and quad_err < 1e-9
    report(1, ok, f"S(2) err {s2_err:.1e}; A(2) vs (23-e+<et^4>)/24 err {printed_err:.3f} "
                  f"(moment expansion err {reduced_err:.1e}); closed vs quadrature {quad_err:.1e}")
    assert ok


# -- 2. conservation in mean ---------------------------------------------------------

@pytest.mark.slow
def test_criterion_2_conservation_in_mean(report):
    R, N = 100, 10_000
    d3 = []
    for r in range(R):
        ens = dsmc.init_ensemble("3d", N, dsmc.Gaussian3D(1.0), seed=202, replica=r)
        t0 = dsmc.temperature(ens)
        dsmc.advance(ens, CANON, 10.0, 0.01)
        d3.append(dsmc.temperature(ens) - t0)
    rule1 = trade_rule(0.3, sym(0.3, 0.3))
    d1 = []
    for r in range(R):
        ens = dsmc.init_ensemble("1d", N, dsmc.ExponentialWealth(1.0), seed=203, replica=r)
        m0 = dsmc.raw_moment(ens, 1)
        dsmc.advance(ens, rule1, 10.0, 0.01)
        d1.append(dsmc.raw_moment(ens, 1) - m0)
    out = []
    for d in (np.array(d3), np.array(d1)):
        se = d.std(ddof=1) / math.sqrt(R)
        out.append((d.mean(), se, abs(d.mean()) <= 4 * se))
    ok = out[0][2] and out[1][2]
    report(2, ok, "3D mean |v|^2 drift {:.2e} (SE {:.1e}); 1D mean wealth drift {:.2e} "
                  "(SE {:.1e})".format(out[0][0], out[0][1], out[1][0], out[1][1]))
    assert ok


# -- 3. moment rates -----------------------------------------------------------------

@pytest.mark.slow
def test_criterion_3_moment_rates(report):
    rule = trade_rule(0.995, sym(0.995, math.sqrt(0.05)))
    s3 = kernels.kernel_S(3.0, rule).value
    assert 0.05 <= s3 <= 0.5
    traces = []
    for r in range(20):
        ens = dsmc.init_ensemble("1d", 100_000, dsmc.ExponentialWealth(1.0), seed=303, replica=r)
        traces.append(dsmc.run_trace(ens, rule, 8.0, 0.01, (3.0,), 0.5))
    t = np.array(traces[0].times)
    m3 = np.mean([tr.moments[3.0] for tr in traces], axis=0)
    rate, _ = dsmc.fit_exponential_rate(t, m3, (2.0, 8.0))
    ok_a = abs(rate - s3) <= 0.10 * s3

    rule4 = trade_rule(0.5, sym(0.5, 0.1))
    s4 = kernels.kernel_S(4.0, rule4).value
    assert s4 < 0
    ratios = []
    for r in range(20):
        ens = dsmc.init_ensemble("1d", 100_000, dsmc.ExponentialWealth(1.0), seed=304, replica=r)
        tr = dsmc.run_trace(ens, rule4, 20.0, 0.05, (4.0,), 0.5)
        m4 = np.array(tr.moments[4.0])
        ratios.append(m4.max() / m4[0])
    ok_b = max(ratios) < 2.0
    ok = ok_a and ok_b
    report(3, ok, f"m3 rate {rate:.4f} vs S(3) = {s3:.4f} ({(rate / s3 - 1) * 100:+.1f}%); "
                  f"S(4) = {s4:.3f}, max m4(t)/m4(0) = {max(ratios):.3f}")
    assert ok


# -- 4. fourth-moment relaxation -----------------------------------------------------

@pytest.mark.slow
def test_criterion_4_fourth_moment_relaxation(report):
    zeta = kernels.zeta_mean(E, CANON_LAW)
    assert zeta == pytest.approx(ZETA_CANON, abs=1e-14)
    assert zeta > 0
    traces = []
    for r in range(10):
        ens = dsmc.init_ensemble("3d", 100_000, dsmc.Sphere3D(1.0), seed=404, replica=r)
        traces.append(dsmc.run_trace(ens, CANON, 8.0, 0.02, (2.0, 4.0), 0.2))
    t = np.array(traces[0].times)
    m4 = np.mean([tr.moments[4.0] for tr in traces], axis=0)
    rate, m4_inf, r2 = dsmc.fit_relaxation_rate(t, m4, (0.0, 8.0))
    ok = abs(rate - zeta) <= 0.15 * zeta and r2 > 0.99
    report(4, ok, f"m4 relaxation rate {rate:.4f} vs <zeta> = 1 - A(2) = {zeta:.4f} "
                  f"({(rate / zeta - 1) * 100:+.1f}%), m4 -> {m4_inf:.3f}, r2 {r2:.5f}")
    assert ok


# -- 5. Fourier distances ------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_fourier_distances(report):
    k = metrics.default_kgrid()
    a = dsmc.init_ensemble("3d", 100_000, dsmc.Gaussian3D(1.0), seed=505, exact_temperature=True)
    b = dsmc.init_ensemble("3d", 100_000, dsmc.Sphere3D(1.0), seed=505, exact_temperature=True)
    hooks = {
        "d2": lambda va, vb: metrics.ds_metric(metrics.cf_3d(va, k), metrics.cf_3d(vb, k), 2.0),
        "d4": lambda va, vb: metrics.ds_metric(metrics.cf_radial(va, k),
                                               metrics.cf_radial(vb, k), 4.0),
    }
    # d2 is costly (32 directions); d4 is cheap, so record d4 on a finer clock
    d4_hooks = {"d4": hooks["d4"]}
    a4, b4 = a.copy(), b.copy()
    _, _, rep = dsmc.run_experiment(a, b, CANON, 10.0, 0.02, (2.0,), hooks, 2.0)
    _, _, rep4 = dsmc.run_experiment(a4, b4, CANON, 10.0, 0.02, (2.0,), d4_hooks, 0.5)
    d2 = rep.trajectory("d2")
    ok_max = bool(np.all(d2 <= 1.05 * d2[0]))
    ok_mono = bool(np.all(d2[1:] <= 1.05 * d2[:-1]))
    c2 = kernels.contraction_rate_C(2.0, E, CANON_LAW)
    assert 0.05 <= c2 <= 0.5
    rate, _ = rep4.fit("d4", (0.0, 10.0))
    ok_rate = abs(-rate - c2) <= 0.20 * c2
    ok = ok_max and ok_mono and ok_rate
    report(5, ok, f"d2: {d2[0]:.4f} -> {d2[-1]:.2e}, max ratio {d2.max() / d2[0]:.3f}; "
                  f"d4 decay rate {-rate:.4f} vs C(2) = {c2:.4f} ({(-rate / c2 - 1) * 100:+.1f}%)")
    assert ok


# -- 6. Wasserstein ------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_wasserstein(report):
    lam, h = 0.3, 0.3
    rule = trade_rule(lam, sym(lam, h))
    s2 = kernels.S_closed_form_2(rule)
    assert s2 < 0
    v = 2 * lam * (1 - lam) / (-s2) - 1  # stationary variance at unit mean
    N = 100_000
    rng = np.random.default_rng(606)
    init = []
    for var in (1.5 * v, 0.5 * v):
        x = rng.gamma(1 / var, var, N)
        init.append(dsmc.FromSamples(tuple(x / x.mean())))
    ea = dsmc.init_ensemble("1d", N, init[0], seed=607)
    eb = dsmc.init_ensemble("1d", N, init[1], seed=607)
    _, _, rep = dsmc.run_experiment(ea, eb, rule, 10.0, 0.01, (1.0,),
                                    {"w2": metrics.w2_1d}, 0.5)
    rate_1d, _ = rep.fit("w2", (1.0, 10.0))
    ok_1d = abs(rate_1d - s2) <= 0.15 * abs(s2)

    # 3D: sliced W2 on coupled runs at N = 1e5 must not increase.  At N = 512 it is
    # checked against exact assignment: sqrt(3) * sliced never exceeds W2, and
    # the exact distance follows the same non-increasing trend
    a = dsmc.init_ensemble("3d", 100_000, dsmc.Gaussian3D(1.0), seed=608, exact_temperature=True)
    b = dsmc.init_ensemble("3d", 100_000, dsmc.Sphere3D(1.0), seed=608, exact_temperature=True)
    hook = {"sliced": lambda x, y: metrics.w2_3d(x, y, "sliced", 64, 7)}
    _, _, rep3 = dsmc.run_experiment(a, b, CANON, 6.0, 0.02, (2.0,), hook, 1.0)
    sl = rep3.trajectory("sliced")
    ok_3d = bool(np.all(sl[1:] <= 1.05 * sl[:-1]))

    bound, w_ex = [], []
    for r in range(4):
        a = dsmc.init_ensemble("3d", 512, dsmc.Gaussian3D(1.0), seed=609, replica=r,
                               exact_temperature=True)
        b = dsmc.init_ensemble("3d", 512, dsmc.Sphere3D(1.0), seed=609, replica=r,
                               exact_temperature=True)
        hooks = {"sliced": lambda x, y: metrics.w2_3d(x, y, "sliced", 128, 7),
                 "exact": lambda x, y: metrics.w2_3d(x, y, "exact")}
        _, _, rep5 = dsmc.run_experiment(a, b, CANON, 6.0, 0.02, (2.0,), hooks, 1.0)
        ex = rep5.trajectory("exact")
        bound.append(float(np.max(rep5.trajectory("sliced") / ex)))
        w_ex.append(ex)
    ex = np.mean(w_ex, axis=0)
    ok_val = max(bound) <= 1.05 and bool(np.all(ex[1:] <= 1.05 * ex[:-1]))
    ok = ok_1d and ok_3d and ok_val
    report(6, ok, f"1D W2 rate {rate_1d:.4f} vs S(2) = {s2:.4f} "
                  f"({(rate_1d / s2 - 1) * 100:+.1f}%); 3D sliced W2 {sl[0]:.4f} -> {sl[-1]:.4f} "
                  f"(max step ratio {np.max(sl[1:] / sl[:-1]):.3f}); N = 512 exact W2 "
                  f"{ex[0]:.3f} -> {ex[-1]:.3f}, sliced/exact <= {max(bound):.3f}")
    assert ok


# -- 7. Pareto tail ------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_pareto_tail(report):
    rule = trade_rule(0.9, sym(0.9, 0.35))
    s_star = kernels.pareto_index(rule, 30.0).s_star
    assert 2.5 <= s_star <= 5
    pooled = []
    for r in range(10):
        ens = dsmc.init_ensemble("1d", 1_000_000, dsmc.ExponentialWealth(1.0), seed=707,
                                 replica=r)
        dsmc.advance(ens, rule, 30.0, 0.05)
        pooled.append(ens.velocities)
    hill = metrics.hill_tail_index(np.concatenate(pooled), 0.02)
    ok = abs(hill - s_star) <= 0.15 * s_star
    report(7, ok, f"Hill index {hill:.3f} vs s* = {s_star:.4f} ({(hill / s_star - 1) * 100:+.1f}%)")
    assert ok


# -- 8. steady state -----------------------------------------------------------------

def test_criterion_8_steady_state(report):
    el = steady.solve_steady_state(steady.build_ab_kernel(1.0, deterministic(1.0)))
    x = el.profile.xgrid
    el_err = float(np.abs(el.profile.psi - np.exp(-x * x / 6)).max())

    kern = steady.build_ab_kernel(E, CANON_LAW)
    sol = steady.solve_steady_state(kern)  # raises if any iterate fails to decrease
    fine = steady.solve_steady_state(kern, steady.refine_grid(40.0, 801))
    grid_err = float(np.abs(fine.raw.psi[::2] - sol.raw.psi).max())
    nontrivial = sol.raw.psi[-1] < 0.5 and float(np.abs(sol.profile.psi - np.exp(-x * x / 6)).max()) > 1e-3

    gv = steady.gevrey_check(sol.profile)
    env = gv.best
    ok_gev = gv.feasible and steady.envelope_holds(sol.profile, env)

    flag_canon = steady.condd_check(E, CANON_LAW).flagged
    bad_law = discrete([(-0.8, 12 / 35), (0.2, 0.3), (0.6, 5 / 14)], 0.8)
    flag_bad = steady.condd_check(0.8, bad_law).flagged

    ok = (el_err < 1e-12 and sol.monotone_violation <= 1e-12 and nontrivial and grid_err < 1e-6
          and ok_gev and not flag_canon and flag_bad)
    report(8, ok, f"elastic err {el_err:.1e}; e=0.9 converged in {sol.iterations} iterations, "
                  f"monotone violation {sol.monotone_violation:.1e}, grid doubling {grid_err:.1e}; "
                  f"Gevrey (kappa, mu, R) = ({env.kappa:.4f}, {env.mu:.4f}, {env.R}); "
                  f"condd flags atom at 1-e: {flag_bad}, canonical: {flag_canon}")
    assert ok


# -- 9. Gamma limit ------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_9_gamma_limit(report):
    gamma = 0.5  # beta^2 / lam, held fixed
    mass, mean = kernels.gamma_moments_by_quadrature(gamma)
    ok_q = abs(mass - 1) < 1e-8 and abs(mean - 1) < 1e-8
    N, R = 100_000, 10
    dists = []
    for lam in (0.1, 0.05, 0.025):
        h = math.sqrt(gamma * lam)
        rule = trade_rule(lam, sym(1 - lam, h), TradeForm.MIXING)
        assert kernels.stationary_index(rule) == pytest.approx(1 + 2 / gamma)
        pooled = []
        for r in range(R):
            x = kernels.gamma_sample(np.random.default_rng([909, r]), gamma, N)
            ens = dsmc.init_ensemble("1d", N, dsmc.FromSamples(tuple(x / x.mean())), seed=910,
                                     replica=r)
            dsmc.advance(ens, rule, 8.0 / lam, 0.05)
            pooled.append(ens.velocities / ens.velocities.mean())
        # pooling keeps the heavy-tail sampling floor of W2 below the lam-dependent bias
        w = np.concatenate(pooled)
        dists.append(metrics.w2_to_law(w, lambda u: kernels.gamma_ppf(u, gamma)))
    ok_trend = dists[0] > dists[1] > dists[2]
    ok = ok_q and ok_trend
    report(9, ok, f"M mass {mass:.12f}, mean {mean:.12f}; W2 to M at lam = 0.1, 0.05, 0.025: "
                  + ", ".join(f"{d:.4f}" for d in dists))
    assert ok


# -- 10. determinism -----------------------------------------------------------------

def test_criterion_10_determinism(tmp_path, report):
    import yaml

    from rrmaxwell import cli

    cfg = {
        "model": "granular3d", "seed": 1010,
        "rule": {"e": 0.9, "law": {"kind": "two_point", "rho": "canonical"}},
        "simulate": {"N": 4000, "replicas": 3, "t_end": 2.0, "dt": 0.02, "record_every": 0.5,
                     "orders": [2, 4], "initial": {"kind": "gaussian3d"},
                     "compare": {"kind": "sphere3d"}, "save_final": True},
        "metrics": {"w2": "sliced", "sliced_directions": 16, "ds": [2.0], "ds_radial": [4.0],
                    "directions": 8, "n_k": 50},
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    runs = []
    for n, threads in enumerate(("1", "2")):
        out = tmp_path / f"run{n}"
        assert cli.main(["simulate", "--config", str(path), "--out", str(out),
                         "--threads", threads]) == 0
        runs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))})
    same = runs[0].keys() == runs[1].keys() and all(runs[0][f] == runs[1][f] for f in runs[0])
    n_csv = sum(f.endswith(".csv") for f in runs[0])
    ok = same and n_csv >= 4
    report(10, ok, f"{len(runs[0])} output files ({n_csv} CSVs) bitwise identical across two runs")
    assert ok
