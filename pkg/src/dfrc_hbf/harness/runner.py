"""Seeded experiment sweeps with CSV output.

Every (sweep point, baseline, trial) triple is an independent solve whose
random inputs come from its own substreams: the channel depends only on the
trial index (common random numbers across sweep points and baselines) and
so does the initial point. Outputs are byte-identical for equal config and
seed, whatever the number of worker processes.
"""

import csv
import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import algorithms
from ..comm import MuMisoProblem
from ..model import build_scene, generate_geometric_channel, substream
from ..solvers import ProblemSpec, RadarConstraintUnreachable

ARCHITECTURE_OF = {"dps": "dps", "sps": "sps", "fully-digital": "digital"}

RESULT_COLUMNS = (
    "sweep_key",
    "sweep_value",
    "baseline",
    "trial",
    "status",
    "feasible",
    "sum_se",
    "per_user_se",
    "radar_sinr_db",
    "gamma_db",
    "n_rf",
    "n_users",
    "outer_iters",
    "inner_iters",
)
TIMING_COLUMN = "wall_seconds"


def fmt(value):
    """Text form of a CSV field; floats keep 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass(frozen=True)
class Task:
    point_index: int
    point: dict
    baseline: str
    trial: int

    @property
    def trace_name(self):
        return f"trace_p{self.point_index:03d}_{self.baseline}_t{self.trial:04d}.csv"


@dataclass
class Outcome:
    row: dict
    trace: algorithms.ConvergenceTrace


def tasks(cfg):
    """Solves in output order: sweep point, then baseline, then trial."""
    return [
        Task(i, point, baseline, trial)
        for i, point in enumerate(cfg.points())
        for baseline in cfg.baselines
        for trial in range(cfg.trials)
    ]


def build_problem(cfg, point, trial, seed):
    """Problem of one sweep point and trial; randomness from the trial substreams."""
    sys_cfg = cfg.system_config(point)
    scene = build_scene(
        sys_cfg,
        target_angle=math.radians(cfg.target_angle_deg),
        target_power=cfg.target_power,
        target_shape=cfg.target_shape,
        target_length=cfg.target_length,
        n_clutter=cfg.n_clutter,
        clutter_power=cfg.clutter_power,
        clutter_shape=cfg.clutter_shape,
        clutter_length=cfg.clutter_length,
        doppler_hz=cfg.doppler_hz,
        sample_rate_hz=cfg.sample_rate_hz,
    )
    gamma = 10.0 ** (point["gamma_db"] / 10.0)
    if cfg.scenario == "mu-miso":
        rows = [
            generate_geometric_channel(
                sys_cfg, cfg.n_path, seed=substream(seed, "users", trial, user), n_rx=1
            )[0]
            for user in range(point["n_users"])
        ]
        # received sample is h^H x, so h_n is the conjugated channel row
        users = MuMisoProblem(
            np.conj(np.stack(rows)), noise_vars=np.full(len(rows), cfg.noise_var_comm)
        )
        return ProblemSpec(sys_cfg, scene, gamma, users=users)
    H = generate_geometric_channel(sys_cfg, cfg.n_path, seed=substream(seed, "channel", trial))
    return ProblemSpec(sys_cfg, scene, gamma, channel=H)


def run_task(cfg, task, seed):
    key, _ = cfg.sweep
    problem = build_problem(cfg, task.point, task.trial, seed)
    row = {
        "sweep_key": key or "none",
        "sweep_value": "" if key is None else task.point[key],
        "baseline": task.baseline,
        "trial": task.trial,
        "gamma_db": float(task.point["gamma_db"]),
        "n_rf": task.point["n_rf"],
        "n_users": task.point["n_users"] if cfg.scenario == "mu-miso" else "",
    }
    start = time.perf_counter()
    try:
        result = algorithms.thereon_multistart(
            problem,
            ARCHITECTURE_OF[task.baseline],
            seeds=[substream(seed, "init", task.trial, k) for k in range(cfg.n_init)],
            n_outer=cfg.max_outer_iter,
            max_inner=cfg.max_inner_iter,
            outer_tol=cfg.outer_tol,
            rho1=cfg.rho1,
            rho2=cfg.rho2,
        )
    except (algorithms.ThresholdInfeasible, RadarConstraintUnreachable) as exc:
        status = (
            "threshold_infeasible"
            if isinstance(exc, algorithms.ThresholdInfeasible)
            else "radar_unreachable"
        )
        row.update(
            status=status,
            feasible=False,
            sum_se=math.nan,
            per_user_se="",
            radar_sinr_db=math.nan,
            outer_iters=0,
            inner_iters=0,
        )
        row[TIMING_COLUMN] = time.perf_counter() - start
        return Outcome(row, algorithms.ConvergenceTrace())
    per_user = result.per_user_se
    row.update(
        status="ok" if result.feasible else "below_threshold",
        feasible=result.feasible,
        sum_se=result.sum_se,
        per_user_se="" if per_user is None else ";".join(fmt(float(r)) for r in per_user),
        radar_sinr_db=result.radar_sinr_db,
        outer_iters=result.n_outer,
        inner_iters=result.n_inner,
    )
    row[TIMING_COLUMN] = time.perf_counter() - start
    return Outcome(row, result.trace)


def _run_one(args):
    cfg, task, seed = args
    return run_task(cfg, task, seed)


def emit_convergence_trace(trace, path):
    """Write one solve's inner-iteration history as CSV (header only when empty)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(algorithms.ConvergenceTrace.COLUMNS)
        for row in trace.rows():
            writer.writerow([fmt(v) for v in row])


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), math.nan
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def summarize(cfg, rows):
    """Per (sweep point, baseline) statistics as a list of dicts.

    Means and standard errors are taken over feasible solves only; a design
    that misses the radar threshold buys its SE with the radar budget.
    """
    key, _ = cfg.sweep
    out = []
    for i, point in enumerate(cfg.points()):
        for baseline in cfg.baselines:
            group = [
                r
                for r in rows
                if r["baseline"] == baseline
                and (key is None or r["sweep_value"] == point[key])
            ]
            solved = [r for r in group if r["feasible"]]
            se_mean, se_err = _mean_se([r["sum_se"] for r in solved])
            sinr_mean, _ = _mean_se([r["radar_sinr_db"] for r in solved])
            entry = {
                "point": i,
                "sweep_value": "" if key is None else point[key],
                "baseline": baseline,
                "trials": len(group),
                "feasible": sum(bool(r["feasible"]) for r in group),
                "mean_sum_se": se_mean,
                "stderr_sum_se": se_err,
                "mean_radar_sinr_db": sinr_mean,
            }
            if cfg.scenario == "mu-miso":
                n_users = point["n_users"]
                entry["mean_per_user_se"] = se_mean / n_users
            out.append(entry)
    return out


def _write_summary(cfg, seed, stats, path):
    key, _ = cfg.sweep
    lines = [
        f"scenario = {cfg.scenario}",
        f"seed = {seed}",
        f"trials = {cfg.trials}",
        f"sweep = {key or 'none'}",
        "",
    ]
    header = list(stats[0].keys()) if stats else []
    lines.append("\t".join(header))
    for entry in stats:
        lines.append("\t".join(fmt(entry[h]) for h in header))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class ExperimentResult:
    rows: list
    summary: list
    out_dir: str

    @property
    def all_infeasible(self):
        return bool(self.rows) and not any(r["feasible"] for r in self.rows)


def run_experiment(cfg, out_dir=None, seed=None, jobs=1):
    """Run every solve of ``cfg`` and write results.csv, trace files and summary.txt.

    ``seed`` and ``out_dir`` override the config values. With ``jobs > 1``
    solves run in worker processes; the output does not depend on ``jobs``.
    """
    seed = cfg.seed if seed is None else int(seed)
    out_dir = cfg.out if out_dir is None else out_dir
    if seed != cfg.seed:
        cfg = dataclasses.replace(cfg, seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    todo = tasks(cfg)
    args = [(cfg, t, seed) for t in todo]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, args))
    else:
        outcomes = [_run_one(a) for a in args]

    columns = list(RESULT_COLUMNS) + ([TIMING_COLUMN] if cfg.record_timing else [])
    rows = [o.row for o in outcomes]
    with open(os.path.join(out_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])
    for task, outcome in zip(todo, outcomes):
        emit_convergence_trace(outcome.trace, os.path.join(out_dir, task.trace_name))
    stats = summarize(cfg, rows)
    _write_summary(cfg, seed, stats, os.path.join(out_dir, "summary.txt"))
    return ExperimentResult(rows, stats, out_dir)
