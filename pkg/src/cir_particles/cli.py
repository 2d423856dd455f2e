"""Batch command-line front door.

Commands: simulate, regime, phase-diagram, verify, stationary-compare,
laplace-check, collision-scan.  Every artifact is a CSV whose first line is a
comment recording parameters, configuration, seed and code version, so a
report can be reproduced from its own header.  Exit codes: 0 ok, 1 config
error, 2 acceptance failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cirprocess import exact_step, integrated_laplace, sum_process
from .errors import ConfigError, RegimeMismatch
from .events import first_passage_partial_sum
from .integrators import Scheme, SimConfig, Terminated, simulate_batch, simulate_path
from .model import ModelParams, classify_regime
from .randomness import rng_streams
from .stats import empirical_laplace

_FLOAT_KEYS = {
    "alpha", "beta", "gamma", "dt", "horizon", "epsilon", "collision_tol",
    "kick_cap", "mu", "t",
}
_INT_KEYS = {"n", "seed", "paths", "record_stride", "k"}
_STR_KEYS = {"scheme", "x0", "out", "sweep"}


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line is not key=value: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _STR_KEYS:
            values[key] = val
        else:
            raise ConfigError(f"unknown config field {key!r}")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cir-particles",
        description="Monte Carlo lab for colliding CIR particle systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--out", help="output directory for artifacts")
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--horizon", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--collision-tol", dest="collision_tol", type=float)
    common.add_argument("--record-stride", dest="record_stride", type=int)
    common.add_argument("--kick-cap", dest="kick_cap", type=float)
    common.add_argument(
        "--scheme", choices=[s.value for s in Scheme], dest="scheme"
    )
    common.add_argument("--x0", help="comma-separated initial state")

    sub.add_parser("simulate", parents=[common], help="sample trajectories")
    sub.add_parser("regime", parents=[common], help="analytic classification")
    pd = sub.add_parser("phase-diagram", parents=[common], help="sweep grid")
    pd.add_argument("--sweep", required=True,
                    help="grid, e.g. 'alpha=0.4,0.7,2.6;beta=0.5;gamma=0'")
    ver = sub.add_parser("verify", parents=[common], help="run acceptance suite")
    ver.add_argument("--only", help="comma-separated criterion numbers")
    sub.add_parser("stationary-compare", parents=[common],
                   help="long-run law vs exact references")
    lc = sub.add_parser("laplace-check", parents=[common],
                        help="integrated-CIR Laplace transform vs Monte Carlo")
    lc.add_argument("--mu", type=float, action="append",
                    help="transform argument (repeatable)")
    lc.add_argument("--t", dest="t_probe", type=float, action="append",
                    help="time horizon (repeatable)")
    cs = sub.add_parser("collision-scan", parents=[common],
                        help="partial-sum first-passage ladder")
    cs.add_argument("--k", type=int, help="partial-sum order (default: all k)")
    return parser


_DEFAULTS = {
    "alpha": 2.0, "beta": 0.5, "gamma": 1.0, "n": 2,
    "seed": 0, "paths": 100, "dt": 1e-3, "horizon": 1.0,
    "epsilon": None, "collision_tol": 1e-3, "record_stride": 1,
    "kick_cap": 1.0, "scheme": Scheme.TRUNCATED_EULER.value,
}


def _resolve(args: argparse.Namespace) -> dict:
    values = dict(_DEFAULTS)
    if getattr(args, "config", None):
        values.update(_parse_config_file(args.config))
    for key in values:
        given = getattr(args, key, None)
        if given is not None:
            values[key] = given
    values["x0"] = getattr(args, "x0", None) or values.get("x0")
    return values


def _model(values: dict) -> ModelParams:
    try:
        return ModelParams(
            alpha=values["alpha"], beta=values["beta"],
            gamma=values["gamma"], n=values["n"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _sim_config(values: dict) -> SimConfig:
    return SimConfig(
        scheme=Scheme(values["scheme"]),
        dt=values["dt"],
        horizon=values["horizon"],
        epsilon=values["epsilon"],
        collision_tol=values["collision_tol"],
        seed=values["seed"],
        paths=values["paths"],
        record_stride=values["record_stride"],
        kick_cap=values["kick_cap"],
    )


def _initial(values: dict, n: int):
    if values.get("x0") is None:
        return None
    arr = np.array([float(v) for v in str(values["x0"]).split(",")])
    if arr.size != n:
        raise ConfigError(f"x0 needs {n} entries, got {arr.size}")
    return arr


def _header(values: dict, command: str) -> str:
    params = _model(values)
    fields = [
        f"version={__version__}", f"command={command}",
        f"alpha={values['alpha']:g}", f"beta={values['beta']:g}",
        f"gamma={values['gamma']:g}", f"n={values['n']}",
        f"kappa={params.kappa:g}", f"scheme={values['scheme']}",
        f"dt={values['dt']:g}", f"horizon={values['horizon']:g}",
        f"epsilon={values['epsilon'] if values['epsilon'] is not None else 'auto'}",
        f"collision_tol={values['collision_tol']:g}",
        f"kick_cap={values['kick_cap']:g}",
        f"seed={values['seed']}", f"paths={values['paths']}",
        f"record_stride={values['record_stride']}",
    ]
    return "# cir-particles " + " ".join(fields)


def _out_dir(values: dict, args) -> Path:
    out = getattr(args, "out", None) or values.get("out") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    values = _resolve(args)
    params = _model(values)
    config = _sim_config(values)
    initial = _initial(values, params.n)
    out = _out_dir(values, args)

    failures = 0
    traj_lines = [_header(values, "simulate"),
                  "path_id,t," + ",".join(f"lambda_{i+1}" for i in range(params.n))]
    event_lines = [_header(values, "simulate"), "path_id,kind,index,time,level"]
    for path_id in range(config.paths):
        record, log = simulate_path(params, config, path_id, initial)
        if record.terminated == Terminated.NUMERICAL_FAILURE:
            failures += 1
        for t, row in zip(record.times, record.lambdas):
            traj_lines.append(
                f"{path_id},{_fmt(t)}," + ",".join(_fmt(v) for v in row)
            )
        for ev in log.events:
            idx = "" if ev.index is None else ev.index
            event_lines.append(
                f"{path_id},{ev.kind.value},{idx},{_fmt(ev.time)},{_fmt(ev.level)}"
            )
    (out / "trajectories.csv").write_text("\n".join(traj_lines) + "\n")
    (out / "events.csv").write_text("\n".join(event_lines) + "\n")
    print(f"wrote {out / 'trajectories.csv'} and {out / 'events.csv'}")
    return 3 if failures else 0


def _regime_text(values: dict) -> str:
    params = _model(values)
    report = classify_regime(params)
    lines = [
        _header(values, "regime"),
        f"kappa={report.kappa:g}",
        f"global_solution={report.global_solution.value}",
        f"pair_collisions={report.pair_collisions.value}",
        f"zero_hit_lambda1={report.zero_hit_lambda1.value}",
    ]
    for k, verdict in report.multiple_collision_k.items():
        value = k * (params.alpha - (params.n - k) * params.beta)
        lines.append(f"multiple_collision_k{k}: threshold={value:g} verdict={verdict.value}")
    return "\n".join(lines)


def cmd_regime(args) -> int:
    values = _resolve(args)
    text = _regime_text(values)
    print(text)
    if getattr(args, "out", None):
        out = _out_dir(values, args)
        (out / "regime.txt").write_text(text + "\n")
    return 0


def _parse_sweep(spec: str) -> list[dict]:
    axes: dict[str, list[float]] = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, _, vals = part.partition("=")
        key = key.strip()
        if key not in ("alpha", "beta", "gamma"):
            raise ConfigError(f"sweep axis must be alpha/beta/gamma, got {key!r}")
        axes[key] = [float(v) for v in vals.split(",") if v.strip()]
        if not axes[key]:
            raise ConfigError(f"sweep axis {key} is empty")
    if not axes:
        raise ConfigError("sweep spec is empty")
    grid = [{}]
    for key, vals in axes.items():
        grid = [{**point, key: v} for point in grid for v in vals]
    return grid


def cmd_phase_diagram(args) -> int:
    values = _resolve(args)
    out = _out_dir(values, args)
    grid = _parse_sweep(args.sweep)
    lines = [
        _header(values, "phase-diagram"),
        "alpha,beta,gamma,n,kappa,global_solution,pair_collisions,zero_hit_lambda1,"
        "collision_freq,collision_ci_low,collision_ci_high,"
        "zero_hit_freq,zero_hit_ci_low,zero_hit_ci_high",
    ]
    for point in grid:
        pv = dict(values)
        pv.update(point)
        params = _model(pv)
        report = classify_regime(params)
        if pv["paths"] > 0:
            from .stats import binomial_summary

            config = _sim_config(pv)
            res = simulate_batch(
                params, config, event_levels=[config.collision_tol]
            )
            mon = res.monitors[config.collision_tol]
            coll = int((~np.isnan(mon["gap"])).any(axis=1).sum())
            zero = int((~np.isnan(mon["psum"][:, 0])).sum())
            cs = binomial_summary(coll, res.n_paths)
            zs = binomial_summary(zero, res.n_paths)
            empirical = (
                f"{cs.estimate:.6g},{cs.ci95[0]:.6g},{cs.ci95[1]:.6g},"
                f"{zs.estimate:.6g},{zs.ci95[0]:.6g},{zs.ci95[1]:.6g}"
            )
        else:
            empirical = ",,,,,"
        lines.append(
            f"{params.alpha:g},{params.beta:g},{params.gamma:g},{params.n},"
            f"{params.kappa:g},{report.global_solution.value},"
            f"{report.pair_collisions.value},{report.zero_hit_lambda1.value},"
            + empirical
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_acceptance

    only = None
    if getattr(args, "only", None):
        only = [int(v) for v in args.only.split(",")]
    values = _resolve(args)
    out = getattr(args, "out", None)
    results = run_acceptance(only=only)
    if out:
        out_dir = _out_dir(values, args)
        lines = [_header(values, "verify"), "criterion,name,passed,details"]
        for r in results:
            detail = " | ".join(r.details).replace(",", ";")
            lines.append(f"{r.index},{r.name},{int(r.passed)},{detail}")
        (out_dir / "acceptance.csv").write_text("\n".join(lines) + "\n")
    return 0 if all(r.passed for r in results) else 2


def cmd_stationary_compare(args) -> int:
    from .stationary import compare_long_run

    values = _resolve(args)
    params = _model(values)
    config = _sim_config(values)
    out = _out_dir(values, args)
    report = compare_long_run(params, config)
    lines = [
        _header(values, "stationary-compare"),
        "name,estimate,stderr,ci_low,ci_high,ks_D,ks_p,n_samples",
    ]
    for name, s in report.items():
        lines.append(
            f"{name},{s.estimate:.8g},{s.stderr:.4g},{s.ci95[0]:.8g},"
            f"{s.ci95[1]:.8g},{s.ks_D:.6g},{s.ks_p:.6g},{s.n_samples}"
        )
    (out / "stationary.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'stationary.csv'}")
    return 0


def cmd_laplace_check(args) -> int:
    values = _resolve(args)
    params = _model(values)
    out = _out_dir(values, args)
    mus = getattr(args, "mu", None) or [0.5, 1.0]
    t_probes = sorted(getattr(args, "t_probe", None) or [0.5, 1.0, 2.0])
    n_paths = values["paths"]
    sub_dt = values["dt"]
    cir = sum_process(params)
    sum0 = float(np.arange(1.0, params.n + 1.0).sum())
    rng = rng_streams(values["seed"], 0)
    r = np.full(n_paths, sum0)
    integral = np.zeros(n_paths)
    probes: dict[float, np.ndarray] = {}
    n_steps = int(round(t_probes[-1] / sub_dt))
    for s in range(n_steps):
        r_new = exact_step(cir, r, sub_dt, rng)
        integral += 0.5 * (r + r_new) * sub_dt
        r = r_new
        t_now = (s + 1) * sub_dt
        for tp in t_probes:
            if abs(t_now - tp) < sub_dt / 2 and tp not in probes:
                probes[tp] = integral.copy()
    lines = [
        _header(values, "laplace-check"),
        "mu,t,closed_form,mc_estimate,mc_stderr,z_score",
    ]
    worst = 0.0
    for tp in t_probes:
        for mu in mus:
            query = integrated_laplace(params, sum0, mu, tp)
            emp = empirical_laplace(probes[tp], mu)
            z = (emp.estimate - query.value) / emp.stderr if emp.stderr else 0.0
            worst = max(worst, abs(z))
            lines.append(
                f"{mu:g},{tp:g},{query.value:.8g},{emp.estimate:.8g},"
                f"{emp.stderr:.4g},{z:.4g}"
            )
    (out / "laplace.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'laplace.csv'} (worst |z| = {worst:.2f})")
    return 0


def cmd_collision_scan(args) -> int:
    values = _resolve(args)
    params = _model(values)
    config = _sim_config(values)
    out = _out_dir(values, args)
    ks = [args.k] if getattr(args, "k", None) else list(range(1, params.n + 1))
    lines = [
        _header(values, "collision-scan"),
        "k,delta,hit_fraction,ci_low,ci_high,n_paths",
    ]
    for k in ks:
        ladder = first_passage_partial_sum(params, config, k)
        for delta, summary in sorted(ladder.items(), reverse=True):
            lines.append(
                f"{k},{delta:g},{summary.estimate:.6g},{summary.ci95[0]:.6g},"
                f"{summary.ci95[1]:.6g},{summary.n_samples}"
            )
    (out / "first_passage.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'first_passage.csv'}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "regime": cmd_regime,
    "phase-diagram": cmd_phase_diagram,
    "verify": cmd_verify,
    "stationary-compare": cmd_stationary_compare,
    "laplace-check": cmd_laplace_check,
    "collision-scan": cmd_collision_scan,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except RegimeMismatch as exc:
        print(f"regime mismatch: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
