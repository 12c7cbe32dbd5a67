"""Command-line front end: plan, simulate, verify, bounds, tune, lqr, reproduce.

Each command reads one JSON config (see :mod:`hookquad.config`), writes its
artifacts into ``--out``, and finishes with a ``manifest.json`` recording
checksums and timings.  Exit codes are stable API:

====  =========================================================
code  meaning
====  =========================================================
0     success
1     other library error (bad config, solver failure, ...)
2     planner found the mission infeasible
3     hook tip missed the payload at the grasp event
4     closed-loop simulation diverged
5     hyperparameter search found no feasible point
====  =========================================================
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import config as cfgmod
from . import hyperopt, sim, verify
from .control import lqr_design
from .errors import Diverged, GraspFailed, HookquadError, Infeasible, NoFeasiblePoint
from .planner import MissionPlan, plan_mission

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_GRASP_FAILED = 3
EXIT_DIVERGED = 4
EXIT_NO_FEASIBLE_POINT = 5


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override RNG seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="worker bound for batched commands (vectorized internally)",
    )


def _load(args) -> dict:
    return cfgmod.load_config(args.config) if args.config else {}


def _outdir(args) -> str:
    import os

    os.makedirs(args.out, exist_ok=True)
    return args.out


def _path(args, name: str) -> str:
    import os

    return os.path.join(_outdir(args), name)


def _finish(manifest: cfgmod.RunManifest, args) -> int:
    manifest.out_dir = args.out
    if args.config:
        manifest.config_paths = [args.config]
    manifest.save(_path(args, "manifest.json"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------

def _write_reference_csv(plan: MissionPlan, path: str, rate: float) -> None:
    n = int(round(rate * plan.duration))
    rows = np.empty((n + 1, 12))
    for k in range(n + 1):
        t = min(k / rate, plan.duration)
        r, v, a, psi, seg = plan.reference(t)
        rows[k] = [t, *r, *v, *a, psi, seg]
    header = "t,x,y,z,vx,vy,vz,ax,ay,az,psi,segment"
    np.savetxt(path, rows, fmt="%.10g", delimiter=",", header=header, comments="")


def cmd_plan(args) -> int:
    cfg = _load(args)
    p = cfgmod.build_params(cfg)
    spec = cfgmod.build_mission(cfg)
    manifest = cfgmod.RunManifest("plan", seed=args.seed)

    timings: dict = {}
    t0 = time.perf_counter()
    plan = plan_mission(spec, p, timings=timings)
    timings["total_ms"] = (time.perf_counter() - t0) * 1e3

    plan_path = _path(args, "plan.json")
    plan.save_json(plan_path)
    csv_path = _path(args, "trajectory.csv")
    _write_reference_csv(plan, csv_path, args.sample_rate)
    timing_path = _path(args, "timings.json")
    cfgmod.write_json(timing_path, timings)

    manifest.add_artifact("plan.json", plan_path)
    manifest.add_artifact("trajectory.csv", csv_path)
    manifest.add_artifact("timings.json", timing_path)
    manifest.timings = {"plan_s": timings["total_ms"] / 1e3}
    print(
        "planned %.2f s mission (flight %.2f s) in %.0f ms"
        % (plan.duration, plan.flight_time, timings["total_ms"])
    )
    return _finish(manifest, args)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load(args)
    p = cfgmod.build_params(cfg)
    manifest = cfgmod.RunManifest("simulate", seed=args.seed)

    if args.plan:
        plan = MissionPlan.load_json(args.plan)
        # the scenario may override the planned one (e.g. a payload that is
        # not where the plan expected it) as long as the endpoints agree
        spec = cfgmod.build_mission(cfg) if "mission" in cfg else plan.spec
    else:
        spec = cfgmod.build_mission(cfg)
        plan = plan_mission(spec, p)

    m_L = args.payload_mass
    if m_L is None:
        m_L = p.m_L if p.m_L > 0 else 0.075
    p_loaded = p.with_payload(m_L)

    sim_cfg = cfgmod.build_sim_config(cfg, seed=args.seed)
    gains = cfgmod.build_gains(cfg)

    t0 = time.perf_counter()
    trace = sim.run_mission(spec, plan, sim_cfg, p_loaded, gains=gains)
    wall = time.perf_counter() - t0

    trace_path = _path(args, "trace.csv")
    trace.write_csv(trace_path)
    log_path = _path(args, "control_log.csv")
    log = np.column_stack([trace.t, trace.u, trace.mode])
    np.savetxt(
        log_path, log, fmt="%.10g", delimiter=",",
        header="t,F,tau_x,tau_y,tau_z,mode", comments="",
    )
    report = sim.metrics(trace, plan)
    metrics_path = _path(args, "metrics.json")
    sim.write_metrics_json(report, metrics_path)

    manifest.add_artifact("trace.csv", trace_path)
    manifest.add_artifact("control_log.csv", log_path)
    manifest.add_artifact("metrics.json", metrics_path)
    manifest.timings = {"simulate_s": wall}
    print(
        "simulated %.1f s (payload %g kg): RMSE %.4f m, final error %.4f m, "
        "max swing %.3f rad"
        % (trace.t[-1], m_L, report["rmse"], report["final_payload_error"],
           report["max_swing"])
    )
    return _finish(manifest, args)


# ---------------------------------------------------------------------------
# verify / bounds
# ---------------------------------------------------------------------------

def _region_from_cfg(section: dict, p) -> verify.OperatingRegion:
    region = verify.OperatingRegion.default(p)
    if "region_a" in section:
        region = verify.OperatingRegion(
            np.asarray(section["region_a"], dtype=float),
            np.asarray(section.get("u_lo", region.u_lo), dtype=float),
            np.asarray(section.get("u_hi", region.u_hi), dtype=float),
        )
    return region


def cmd_verify(args) -> int:
    cfg = _load(args)
    section = dict(cfg.get("verify", {}))
    p = cfgmod.build_params(cfg)
    if p.m_L == 0:
        p = p.with_payload(0.075)
    manifest = cfgmod.RunManifest("verify", seed=args.seed)

    region = _region_from_cfg(section, p)
    gain = lqr_design(p)
    seed = args.seed if args.seed is not None else int(section.get("seed", 12345))

    t0 = time.perf_counter()
    cert = verify.certify_roa(
        region,
        gain,
        p,
        N=args.n if args.n is not None else int(section.get("n", 1000)),
        beta=args.beta if args.beta is not None else float(section.get("beta", 1e-6)),
        T_sim=float(section.get("t_sim", 20.0)),
        r_conv=float(section.get("r_conv", 1e-3)),
        seed=seed,
    )
    wall = time.perf_counter() - t0

    cert_path = _path(args, "certificate.json")
    cert.save_json(cert_path)
    manifest.add_artifact("certificate.json", cert_path)
    manifest.timings = {"verify_s": wall}
    print(
        "decision=%s with N=%d samples, violation bound %.6f (%.1f s)"
        % (cert.decision, cert.N, cert.epsilon, wall)
    )
    return _finish(manifest, args)


def cmd_bounds(args) -> int:
    cfg = _load(args)
    section = dict(cfg.get("bounds", {}))
    p = cfgmod.build_params(cfg)
    if p.m_L == 0:
        p = p.with_payload(0.075)
    manifest = cfgmod.RunManifest("bounds", seed=args.seed)

    region = _region_from_cfg(section, p)
    seed = args.seed if args.seed is not None else int(section.get("seed", 7))
    t0 = time.perf_counter()
    delta_r, delta_R = verify.disturbance_bounds(
        region,
        p,
        n_probe=int(section.get("n_probe", 10_000)),
        n_starts=int(section.get("n_starts", 64)),
        inflation=float(section.get("inflation", 1.1)),
        seed=seed,
    )
    wall = time.perf_counter() - t0

    report = {
        "delta_r": delta_r,
        "delta_R": delta_R,
        "region": {"a": region.a, "u_lo": region.u_lo, "u_hi": region.u_hi},
        "inflation": float(section.get("inflation", 1.1)),
        "seed": seed,
        "m_L": p.m_L,
    }
    path = _path(args, "bounds.json")
    cfgmod.write_json(path, report)
    manifest.add_artifact("bounds.json", path)
    manifest.timings = {"bounds_s": wall}
    print("delta_r = %.4f N, delta_R = %.5f N m (%.1f s)" % (delta_r, delta_R, wall))
    return _finish(manifest, args)


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------

def cmd_tune(args) -> int:
    cfg = _load(args)
    section = dict(cfg.get("tune", {}))
    p = cfgmod.build_params(cfg)
    manifest = cfgmod.RunManifest("tune", seed=args.seed)

    if "scenarios" in section:
        scenarios = [
            cfgmod.MissionSpec.from_dict(d) for d in section["scenarios"]
        ]
    else:
        scenarios = hyperopt.default_scenarios()
    space_kw = {}
    for key in ("lo", "hi"):
        if key in section:
            space_kw[key] = np.asarray(section[key], dtype=float)
    if "grid_shape" in section:
        space_kw["grid_shape"] = tuple(section["grid_shape"])
    for key in ("swarm_size", "swarm_iters"):
        if key in section:
            space_kw[key] = int(section[key])
    space = hyperopt.SearchSpace(scenarios=scenarios, **space_kw)

    seed = args.seed if args.seed is not None else int(section.get("seed", 0))
    log: list = []
    t0 = time.perf_counter()
    gamma = hyperopt.tune(space, method=args.method, seed=seed, p=p, log=log)
    wall = time.perf_counter() - t0

    report = {
        "gamma_star": {name: g for name, g in zip(hyperopt.GAMMA_NAMES, gamma)},
        "method": args.method,
        "seed": seed,
        "evaluations": len(log),
        "scenarios": len(scenarios),
    }
    path = _path(args, "tune.json")
    cfgmod.write_json(path, report)
    table_path = _path(args, "evaluations.csv")
    rows = np.array([[g[0], g[1], g[2], g[3], t, float(ok)] for g, t, ok in log])
    np.savetxt(
        table_path, rows, fmt="%.10g", delimiter=",",
        header="v_max,a_max,lambda_max,w,total_time,feasible", comments="",
    )
    manifest.add_artifact("tune.json", path)
    manifest.add_artifact("evaluations.csv", table_path)
    manifest.timings = {"tune_s": wall}
    print(
        "best gamma: v_max=%.3f a_max=%.3f lambda_max=%.3f w=%.3f (%d evaluations)"
        % (*gamma, len(log))
    )
    return _finish(manifest, args)


# ---------------------------------------------------------------------------
# lqr
# ---------------------------------------------------------------------------

def cmd_lqr(args) -> int:
    cfg = _load(args)
    p = cfgmod.build_params(cfg)
    if p.m_L == 0:
        p = p.with_payload(0.075)
    manifest = cfgmod.RunManifest("lqr", seed=args.seed)

    t0 = time.perf_counter()
    gain = lqr_design(p)
    wall = time.perf_counter() - t0
    path = _path(args, "lqr.json")
    cfgmod.write_json(
        path,
        {
            "K": gain.K,
            "x0": gain.x0,
            "u0": gain.u0,
            "P": gain.P,
            "m_L": p.m_L,
        },
    )
    manifest.add_artifact("lqr.json", path)
    manifest.timings = {"lqr_s": wall}
    print("gain written: u0 = %.4f N hover thrust" % gain.u0[0])
    return _finish(manifest, args)


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------

def cmd_reproduce(args) -> int:
    """Chain plan -> lqr -> simulate x4 -> verify and summarize."""
    import os

    cfg = _load(args)
    section = dict(cfg.get("reproduce", {}))
    p = cfgmod.build_params(cfg)
    manifest = cfgmod.RunManifest("reproduce", seed=args.seed)
    out = _outdir(args)

    cases = cfgmod.reproduce_missions()
    if "cases" in section:
        cases = [cases[i] for i in section["cases"]]
    n_verify = int(section.get("n_verify", 1000))
    seed = args.seed if args.seed is not None else 12345

    summary: dict = {"cases": []}
    t_start = time.perf_counter()
    for i, (spec, m_L) in enumerate(cases):
        case_dir = os.path.join(out, f"case{i + 1}")
        os.makedirs(case_dir, exist_ok=True)
        p_loaded = p.with_payload(m_L)
        plan = plan_mission(spec, p_loaded)
        plan.save_json(os.path.join(case_dir, "plan.json"))
        trace = sim.run_mission(spec, plan, cfgmod.build_sim_config(cfg), p_loaded)
        trace.write_csv(os.path.join(case_dir, "trace.csv"))
        report = sim.metrics(trace, plan)
        sim.write_metrics_json(report, os.path.join(case_dir, "metrics.json"))
        summary["cases"].append(
            {
                "payload_kg": m_L,
                "flight_time_s": plan.flight_time,
                "rmse_m": report["rmse"],
                "peak_error_m": report["peak_error"],
                "final_payload_error_m": report["final_payload_error"],
                "max_swing_rad": report["max_swing"],
            }
        )

    p_verify = p.with_payload(0.075)
    gain = lqr_design(p_verify)
    cfgmod.write_json(
        os.path.join(out, "lqr.json"),
        {"K": gain.K, "x0": gain.x0, "u0": gain.u0, "P": gain.P},
    )
    cert = verify.certify_roa(
        verify.OperatingRegion.default(p_verify), gain, p_verify,
        N=n_verify, seed=seed,
    )
    cert.save_json(os.path.join(out, "certificate.json"))
    summary["certificate"] = cert.to_dict()
    summary["wall_s"] = time.perf_counter() - t_start

    path = _path(args, "summary.json")
    cfgmod.write_json(path, summary)
    manifest.add_artifact("summary.json", path)
    manifest.timings = {"reproduce_s": summary["wall_s"]}
    for i, case in enumerate(summary["cases"]):
        print(
            "case %d: payload %g kg, RMSE %.4f m, final %.4f m, swing %.3f rad"
            % (i + 1, case["payload_kg"], case["rmse_m"],
               case["final_payload_error_m"], case["max_swing_rad"])
        )
    print("certificate: %s (N=%d, eps=%.4f)" % (cert.decision, cert.N, cert.epsilon))
    return _finish(manifest, args)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hookquad",
        description="Plan, simulate, and certify aerial grasp-and-transport missions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="solve the five-segment mission plan")
    _common(sp)
    sp.add_argument("--sample-rate", type=float, default=100.0,
                    help="reference CSV sampling rate in Hz")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", help="run the closed-loop mission simulation")
    _common(sp)
    sp.add_argument("--plan", default=None, help="planned mission JSON (else plan now)")
    sp.add_argument("--payload-mass", type=float, default=None,
                    help="payload mass in kg (default 0.075 unless set in config)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="sampled region-of-attraction certificate")
    _common(sp)
    sp.add_argument("--n", type=int, default=None, help="sample count")
    sp.add_argument("--beta", type=float, default=None, help="confidence parameter")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bounds", help="robust-control disturbance bounds")
    _common(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("tune", help="search planner hyperparameters")
    _common(sp)
    sp.add_argument("--method", choices=("grid", "swarm"), default="grid")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("lqr", help="design the payload regulation gain")
    _common(sp)
    sp.set_defaults(func=cmd_lqr)

    sp = sub.add_parser("reproduce", help="plan, design, simulate all cases, certify")
    _common(sp)
    sp.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except GraspFailed as err:
        print(f"grasp failed: {err}", file=sys.stderr)
        return EXIT_GRASP_FAILED
    except Diverged as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except NoFeasiblePoint as err:
        print(f"no feasible point: {err}", file=sys.stderr)
        return EXIT_NO_FEASIBLE_POINT
    except HookquadError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
