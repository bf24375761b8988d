"""Command-line front end: ``aeroswarm run <config> [options]``."""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import scenarios as sc
from .plot import write_svg
from .swarm_sim import write_traj_csv

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_INVARIANT = 3

METRIC_FIELDS = ("flight_time", "flight_distance", "mean_velocity", "acc_cost", "jerk_cost")
METRICS_HEADER = ("row,run,seed,agent,arrived," + ",".join(METRIC_FIELDS)
                  + ",collision,deadlock,success")

_EPILOG = f"""\
outputs (in --out, else $AEROSWARM_OUT, else ./aeroswarm_out):
  metrics.csv   {METRICS_HEADER}
                row=agent: one line per agent per run (flight_time is nan if not arrived)
                row=mean|std|max: batch statistics over arrived agents (std with ddof=0)
                flight_time s, flight_distance m, mean_velocity m/s,
                acc_cost m^2/s^3 (sum |a|^2 h), jerk_cost m^2/s^5 (sum |j|^2 h)
  events.log    t,agent,event,payload (a 'run' event separates batch runs)
  traj.csv      t,agent,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz for the first run;
                traj_run<k>.csv for later runs
  plot.svg      top-down paths colored by speed, first run
  params.ini    full resolved parameter echo

exit codes: 0 all runs succeeded, 1 a run failed (collision, deadlock or timeout),
            2 config parse error, 3 runtime invariant violation
"""


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def batch_summary(rows: list) -> dict:
    """Mean, population std and max of each metric over arrived agents."""
    arrived = [r for r in rows if r["arrived"]]
    out = {}
    for stat in ("mean", "std", "max"):
        vals = {}
        for f in METRIC_FIELDS:
            x = np.array([r[f] for r in arrived], float)
            if len(x) == 0:
                vals[f] = float("nan")
            elif stat == "mean":
                vals[f] = float(np.mean(x))
            elif stat == "std":
                vals[f] = float(np.std(x))
            else:
                vals[f] = float(np.max(x))
        out[stat] = vals
    return out


def metrics_csv(rows: list, runs: list) -> str:
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in (
            "agent", r["run"], r["seed"], r["agent"], r["arrived"],
            *(r[f] for f in METRIC_FIELDS), r["collision"], r["deadlock"], r["success"])))
    summ = batch_summary(rows)
    n_succ = sum(1 for m in runs if m.success)
    n_coll = sum(1 for m in runs if m.collision_flag)
    n_dead = sum(1 for m in runs if m.deadlock_flag)
    for stat, vals in summ.items():
        lines.append(",".join(_fmt(v) for v in (
            stat, len(runs), "", "", sum(r["arrived"] for r in rows),
            *(vals[f] for f in METRIC_FIELDS), n_coll, n_dead, n_succ)))
    return "\n".join(lines) + "\n"


def _out_dir(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get("AEROSWARM_OUT", "aeroswarm_out"))


def cmd_run(args) -> int:
    try:
        cfg = sc.load_config(args.config)
        if args.mode:
            cfg = cfg.with_mode(args.mode)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except sc.ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.runs < 1:
        print("error: --runs must be at least 1", file=sys.stderr)
        return EXIT_PARSE
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "params.ini").write_text(sc.dump_config(cfg))
    rows, runs, events = [], [], []
    violation = None
    for k in range(args.runs):
        run_cfg = cfg.with_seed(cfg.seed + k)
        sim = sc.build_simulation(run_cfg, budgeted=args.budgeted,
                                  record_corridors=args.plot_corridors and k == 0)
        res = sim.run()
        m = res.metrics
        runs.append(m)
        events.append(f"0.000,-1,run,index={k} seed={run_cfg.seed}")
        events.extend(res.event_lines())
        for a in m.agents:
            rows.append(dict(run=k, seed=run_cfg.seed, agent=a.agent, arrived=a.arrived,
                             flight_time=a.flight_time, flight_distance=a.flight_distance,
                             mean_velocity=a.mean_velocity, acc_cost=a.acc_cost,
                             jerk_cost=a.jerk_cost, collision=m.collision_flag,
                             deadlock=m.deadlock_flag, success=m.success))
        bad = [e for e in res.events if e.kind in ("invariant", "unknown_violation")]
        if bad and violation is None:
            violation = (k, bad[0])
        traj_name = "traj.csv" if k == 0 else f"traj_run{k}.csv"
        write_traj_csv(res.traj_rows, out / traj_name)
        if k == 0:
            write_svg(out / "plot.svg", sim.world, res.traj_rows,
                      _spawns(sim), [a.goal for a in sim.agents],
                      corridors=res.corridors if args.plot_corridors else None)
        print(f"run {k} seed {run_cfg.seed}: success={int(m.success)} "
              f"arrived={m.success_count}/{len(m.agents)} collision={int(m.collision_flag)} "
              f"deadlock={int(m.deadlock_flag)} sim_time={m.sim_time:.1f}s")
    (out / "events.log").write_text("t,agent,event,payload\n" + "".join(e + "\n" for e in events))
    (out / "metrics.csv").write_text(metrics_csv(rows, runs))
    summ = batch_summary(rows)
    print(f"{'metric':<16}{'mean':>10}{'std':>10}{'max':>10}")
    for f in METRIC_FIELDS:
        print(f"{f:<16}{summ['mean'][f]:>10.3f}{summ['std'][f]:>10.3f}{summ['max'][f]:>10.3f}")
    print(f"success {sum(m.success for m in runs)}/{len(runs)} -> {out}")
    if violation is not None:
        k, ev = violation
        print(f"invariant violation in run {k}: {ev.line()}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK if all(m.success and not m.deadlock_flag for m in runs) else EXIT_FAILED


def _spawns(sim) -> list:
    rows = np.asarray(sim.traj_rows, float)
    first = rows[rows[:, 0] == 0.0]
    return [r[2:5] for r in first]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aeroswarm", description="Decentralized swarm planner simulation")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario or a seeded batch",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("config", help="scenario file or builtin name: " + ", ".join(sc.BUILTINS))
    r.add_argument("--runs", type=int, default=1, help="batch size; run k uses seed S+k")
    r.add_argument("--seed", type=int, default=None, help="base seed (default: from config)")
    r.add_argument("--mode", choices=("privileged", "fov"), default=None)
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--plot-corridors", action="store_true", help="draw corridor boxes")
    r.add_argument("--budgeted", action="store_true",
                   help="charge measured planning time against the trajectory period")
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
