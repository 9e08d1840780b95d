"""Command-line driver.

    rrmaxwell kernels  --config cfg.yaml --out DIR
    rrmaxwell simulate --config cfg.yaml --out DIR [--seed U64] [--threads N]
    rrmaxwell steady   --config cfg.yaml --out DIR
    rrmaxwell metrics  --config cfg.yaml --out DIR

Every CSV gets a ``<name>.meta.json`` sidecar (config digest, seed, library
versions).  Floats are written with ``repr`` so files are bitwise
reproducible.  Exit codes: 0 ok, 2 validation, 3 invariant breach,
4 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy

from . import __version__, _backend, dsmc, kernels, metrics, steady
from .config import ExperimentConfig, dumps, load
from .errors import ConvergenceError, InvariantError, ValidationError
from .kernels import Method

# -- output helpers -----------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _meta(cfg: ExperimentConfig, command: str, columns=None) -> dict:
    out = {
        "command": command,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "versions": {
            "rrmaxwell": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "backend": _backend.NAME,
    }
    if columns is not None:
        out["columns"] = list(columns)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_csv(out_dir, name, header, rows, cfg, command):
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    _write_json(path + ".meta.json", _meta(cfg, command, header))
    return path


# -- initial data -------------------------------------------------------------------

def make_initial(d: dict):
    kind = str(d.get("kind", "")).lower()
    args = {k: v for k, v in d.items() if k != "kind"}
    table = {
        "gaussian3d": dsmc.Gaussian3D,
        "uniformball3d": dsmc.UniformBall3D,
        "sphere3d": dsmc.Sphere3D,
        "exponential": dsmc.ExponentialWealth,
        "pareto": dsmc.ParetoWealth,
    }
    if kind == "samples":
        try:
            data = np.loadtxt(args["path"], delimiter=",", skiprows=1, ndmin=1)
        except (KeyError, OSError, ValueError) as exc:
            raise ValidationError(f"simulate.initial: cannot load samples ({exc})") from None
        return dsmc.FromSamples(tuple(map(tuple, data)) if data.ndim == 2 else tuple(data))
    if kind not in table:
        raise ValidationError(f"simulate.initial.kind: unknown {kind!r}")
    try:
        return table[kind](**{k: float(v) for k, v in args.items()})
    except TypeError as exc:
        raise ValidationError(f"simulate.initial: {exc}") from None


def _metric_hooks(cfg: ExperimentConfig, dim):
    m = cfg.metrics
    k = metrics.default_kgrid(m.k_min, m.k_max, m.n_k)
    hooks = {}
    if m.w2 != "none":
        if dim is dsmc.Dim.D1:
            hooks["w2"] = lambda a, b: metrics.w2_1d(a, b)
        else:
            hooks["w2"] = lambda a, b: metrics.w2_3d(a, b, m.w2, m.sliced_directions, seed=cfg.seed)
    if m.ds:
        if dim is dsmc.Dim.D1:
            cf = lambda x: metrics.cf_1d(x, k)
        else:
            cf = lambda x: metrics.cf_3d(x, k, m.directions)

        def ds_hook(a, b):
            fa, fb = cf(a), cf(b)
            return {s: metrics.ds_metric(fa, fb, s) for s in m.ds}

        hooks["ds"] = ds_hook
    if m.ds_radial:
        if dim is dsmc.Dim.D1:
            raise ValidationError("metrics.ds_radial: only defined for granular3d")

        def rad_hook(a, b):
            fa, fb = metrics.cf_radial(a, k), metrics.cf_radial(b, k)
            return {s: metrics.ds_metric(fa, fb, s) for s in m.ds_radial}

        hooks["ds_radial"] = rad_hook
    return hooks


def _run_replica(args):
    cfg, replica = args
    sim = cfg.simulate
    rule = cfg.build_rule()
    dim = dsmc.Dim.D3 if cfg.model == "granular3d" else dsmc.Dim.D1
    a = dsmc.init_ensemble(dim, sim.N, make_initial(sim.initial), cfg.seed, 0, replica)
    if sim.compare is None:
        tr = dsmc.run_trace(a, rule, sim.t_end, sim.dt, sim.orders, sim.record_every)
        return tr, None, None, a.velocities
    run_b = 0 if sim.coupled else 1
    b = dsmc.init_ensemble(dim, sim.N, make_initial(sim.compare), cfg.seed, run_b, replica)
    ta, tb, rep = dsmc.run_experiment(a, b, rule, sim.t_end, sim.dt, sim.orders,
                                      _metric_hooks(cfg, dim), sim.record_every)
    return ta, tb, rep, a.velocities


def run_replicas(cfg: ExperimentConfig, threads: int = 1):
    jobs = [(cfg, r) for r in range(cfg.simulate.replicas)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_run_replica, jobs))
    return [_run_replica(j) for j in jobs]


# -- subcommands ----------------------------------------------------------------

def cmd_kernels(cfg: ExperimentConfig, out_dir: str) -> dict:
    rule = cfg.build_rule()
    ks = cfg.kernels
    rows = []
    summary = {}
    if cfg.model == "economy1d":
        from .kinematics import trade_rule

        for s in ks.s:
            ev = kernels.kernel_S(s, rule)
            rows.append((f"S[s={s!r}]", ev.value, ev.method.value, ev.est_abs_error))
        rows.append(("S2_formula", kernels.S_closed_form_2(rule), Method.CLOSED_FORM.value, 0.0))
        for lam in ks.lam:
            r2 = trade_rule(lam, rule.law, rule.form)
            ev = kernels.kernel_S(2.0, r2)
            rows.append((f"S[s=2.0,lam={lam!r}]", ev.value, ev.method.value, ev.est_abs_error))
            rows.append((f"S2_formula[lam={lam!r}]", kernels.S_closed_form_2(r2),
                         Method.CLOSED_FORM.value, 0.0))
        pi = kernels.pareto_index(rule, ks.s_max)
        if pi.s_star is not None:
            rows.append(("pareto_index", pi.s_star, "root", kernels.ROOT_TOL))
        summary["pareto_index"] = pi.s_star
    else:
        e, law = rule.e, rule.law
        for alpha in ks.alpha:
            ev = kernels.kernel_A(alpha, e, law)
            q = kernels.kernel_A(alpha, e, law, Method.QUADRATURE)
            rows.append((f"A[alpha={alpha!r}]", ev.value, ev.method.value, ev.est_abs_error))
            rows.append((f"A[alpha={alpha!r}]", q.value, q.method.value, q.est_abs_error))
            rows.append((f"C[alpha={alpha!r}]", 1.0 - ev.value, ev.method.value, ev.est_abs_error))
        if law.is_conservative():
            z = kernels.zeta_mean(e, law)
            rows.append(("zeta_mean", z, Method.CLOSED_FORM.value, 0.0))
            summary["zeta_mean"] = z
        rows.append(("A2_moments", kernels.A2_reduced_form(e, law), Method.CLOSED_FORM.value, 0.0))
    write_csv(out_dir, "kernels.csv", ("param", "value", "method", "est_error"), rows, cfg, "kernels")
    return summary


def cmd_simulate(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> dict:
    sim = cfg.simulate
    results = run_replicas(cfg, threads)
    traces = [r[0] for r in results]
    rows = dsmc.aggregate_traces(traces)
    hdr = ("t", "order", "mean", "stderr", "replicas")
    write_csv(out_dir, "moments.csv", hdr, rows, cfg, "simulate")
    summary = {"replicas": sim.replicas, "N": sim.N}
    if sim.compare is not None:
        write_csv(out_dir, "moments_compare.csv", hdr, dsmc.aggregate_traces([r[1] for r in results]),
                  cfg, "simulate")
        reps = [r[2] for r in results]
        mrows = []
        all_rows = [rp.rows() for rp in reps]
        for n, (t, name, s, _) in enumerate(all_rows[0]):
            vals = [rr[n][3] for rr in all_rows]
            mrows.append((t, name, s, math.fsum(vals) / len(vals)))
        write_csv(out_dir, "metrics.csv", ("t", "metric", "s", "value"), mrows, cfg, "simulate")
        summary["max_distance"] = max((abs(r[3]) for r in mrows), default=0.0)
    # temperature / mean-wealth drift across replicas
    key = 2.0 if cfg.model == "granular3d" else 1.0
    if key in traces[0].moments:
        drift = np.array([tr.moments[key][-1] - tr.moments[key][0] for tr in traces])
        se = float(drift.std(ddof=1) / math.sqrt(len(drift))) if len(drift) > 1 else float("nan")
        summary["drift"] = {"order": key, "mean": float(drift.mean()), "stderr": se,
                            "within_4se": bool(abs(drift.mean()) <= 4 * se) if se == se else None}
    if sim.fit:
        summary["fit"] = _fit_summary(cfg, traces)
    if sim.save_final:
        final = results[0][3]
        cols = ("vx", "vy", "vz") if final.ndim == 2 else ("v",)
        write_csv(out_dir, "final_replica0.csv", cols,
                  final.tolist() if final.ndim == 2 else [[x] for x in final.tolist()], cfg, "simulate")
    return summary


def _fit_summary(cfg, traces):
    fit = cfg.simulate.fit
    try:
        order = float(fit["order"])
        window = tuple(float(x) for x in fit.get("window", (0.0, cfg.simulate.t_end)))
    except (KeyError, TypeError, ValueError):
        raise ValidationError("simulate.fit: needs order and window [t0, t1]") from None
    if order not in traces[0].moments:
        raise ValidationError("simulate.fit.order: not among the recorded orders")
    times = np.array(traces[0].times)
    mean = np.mean([tr.moments[order] for tr in traces], axis=0)
    rule = cfg.build_rule()
    if cfg.model == "economy1d":
        rate, r2 = dsmc.fit_exponential_rate(times, mean, window)
        target = kernels.kernel_S(order, rule).value
        return {"kind": "exponential", "order": order, "window": window, "rate": rate, "r2": r2,
                "target_S": target}
    rate, y_inf, r2 = dsmc.fit_relaxation_rate(times, mean, window)
    out = {"kind": "relaxation", "order": order, "window": window, "rate": rate, "limit": y_inf,
           "r2": r2}
    if order == 4.0 and rule.law.is_conservative():
        out["target_zeta_mean"] = kernels.zeta_mean(rule.e, rule.law)
    return out


def cmd_steady(cfg: ExperimentConfig, out_dir: str) -> dict:
    if cfg.model != "granular3d":
        raise ValidationError("steady: only defined for granular3d")
    st = cfg.steady
    rule = cfg.build_rule()
    cd = steady.condd_check(rule.e, rule.law, st.deltas)
    write_csv(out_dir, "condd.csv", ("delta", "joint", "pinned"), cd.rows, cfg, "steady")
    kern = steady.build_ab_kernel(rule.e, rule.law, st.n_nodes)
    grid = steady.sinh_grid(st.n_grid, st.x_max, st.stretch)
    res = steady.solve_steady_state(kern, grid, st.tol, st.max_iter)
    prof = res.profile
    write_csv(out_dir, "profile_fourier.csv", ("x", "psi"), zip(prof.xgrid, prof.psi), cfg, "steady")
    gv = steady.gevrey_check(prof)
    write_csv(out_dir, "gevrey.csv", ("R", "kappa", "mu", "feasible"), gv.table, cfg, "steady")
    v = np.linspace(0.0, st.v_max, st.n_v)
    f = steady.invert_radial(prof, v)
    ratio = steady.overpopulation_ratio(v, f)
    write_csv(out_dir, "profile_density.csv", ("v", "f", "ratio_to_maxwellian"),
              zip(v, f, ratio), cfg, "steady")
    gauss = np.exp(-prof.xgrid**2 / 6.0)
    # tail exponent of psi from the last tenth of the grid (exponential-decay rate)
    n = len(prof.xgrid)
    slope = float(np.polyfit(prof.xgrid[-n // 10:], prof.logpsi[-n // 10:], 1)[0])
    outer = (v >= 0.6 * st.v_max) & (f > 0)
    tail = float(np.polyfit(np.log(v[outer]), np.log(f[outer]), 1)[0]) if outer.sum() > 2 else None
    return {
        "iterations": res.iterations,
        "residual": res.residual,
        "monotone_violation": res.monotone_violation,
        "scale": res.scale,
        "scale_convention": "x rescaled by sqrt(m2) so that psi = 1 - x^2/6 + ...",
        "second_moment_fourier": prof.second_moment(),
        "mass": steady.radial_moment(v, f, 0),
        "second_moment_density": steady.radial_moment(v, f, 2),
        "max_abs_diff_from_gaussian": float(np.abs(prof.psi - gauss).max()),
        "psi_tail_decay_rate": -slope,
        "density_log_slope_outer": tail,
        "condd": {"joint_vanishes": cd.joint_vanishes, "pinned_vanishes": cd.pinned_vanishes,
                  "flagged": cd.flagged},
        "gevrey": None if gv.best is None else
        {"kappa": gv.best.kappa, "mu": gv.best.mu, "R": gv.best.R},
        "overpopulation_ratio": {"v": v[::10].tolist(), "ratio": ratio[::10].tolist()},
    }


def _load_samples(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"metrics: cannot load {path}: {exc}") from None
    return data


def cmd_metrics(cfg: ExperimentConfig, out_dir: str) -> dict:
    m = cfg.metrics
    if m.a is None:
        raise ValidationError("metrics.a: sample file required")
    a = _load_samples(m.a)
    rows, summary = [], {}
    k = metrics.default_kgrid(m.k_min, m.k_max, m.n_k)
    if m.b is not None:
        b = _load_samples(m.b)
        if a.ndim == 1:
            rows.append((0.0, "w2", "", metrics.w2_1d(a, b)))
            fa, fb = metrics.cf_1d(a, k), metrics.cf_1d(b, k)
        else:
            meth = "exact" if m.w2 == "exact" else "sliced"
            rows.append((0.0, "w2", "", metrics.w2_3d(a, b, meth, m.sliced_directions, cfg.seed)))
            fa, fb = metrics.cf_3d(a, k, m.directions), metrics.cf_3d(b, k, m.directions)
        for s in m.ds:
            rows.append((0.0, "ds", s, metrics.ds_metric(fa, fb, s)))
        if a.ndim == 2:
            ra, rb = metrics.cf_radial(a, k), metrics.cf_radial(b, k)
            for s in m.ds_radial:
                rows.append((0.0, "ds_radial", s, metrics.ds_metric(ra, rb, s)))
    if a.ndim == 1:
        if m.gamma_lambda is not None:
            scaled = a / a.mean()
            rows.append((0.0, "w2_gamma", "",
                         metrics.w2_to_law(scaled, lambda u: kernels.gamma_ppf(u, m.gamma_lambda))))
        if np.all(a > 0) and a.size >= 1000:
            h = metrics.hill_tail_index(a, m.hill_fraction)
            rows.append((0.0, "hill", m.hill_fraction, h))
            summary["hill"] = h
    write_csv(out_dir, "metrics.csv", ("t", "metric", "s", "value"), rows, cfg, "metrics")
    return summary


COMMANDS = {"kernels", "simulate", "steady", "metrics"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rrmaxwell", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in sorted(COMMANDS):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", required=True, metavar="DIR")
        sp.add_argument("--seed", type=int, default=None, metavar="U64")
        sp.add_argument("--threads", type=int, default=1, metavar="N")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ValidationError("--seed: must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        if args.threads < 1:
            raise ValidationError("--threads: must be at least 1")
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "config.resolved.yaml"), "w") as fh:
            fh.write(dumps(cfg))
        if args.command == "kernels":
            summary = cmd_kernels(cfg, args.out)
        elif args.command == "simulate":
            summary = cmd_simulate(cfg, args.out, args.threads)
        elif args.command == "steady":
            summary = cmd_steady(cfg, args.out)
        else:
            summary = cmd_metrics(cfg, args.out)
        summary = {"meta": _meta(cfg, args.command), "results": summary}
        _write_json(os.path.join(args.out, f"summary_{args.command}.json"), summary)
    except (ValidationError, InvariantError, ConvergenceError) as exc:
        print(f"rrmaxwell: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
