"""Command-line front end.

Exit codes: 0 success, 1 domain/runtime error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis, trajectories
from .atom_cavity import no_jump_amplitudes_array, survival_probability
from .config import ConfigError, RunConfig, parse_grid
from .errors import PreconditionError, QutritHeraldError
from .optics import DETECTORS
from .protocol import emission_probability_P2, enumerate_outcomes, run_cascade, target_state

COMMANDS = ("amplitudes", "trajectories", "cascade", "outcomes", "sweep", "fidelity-scan")


def _echo(cfg: RunConfig) -> dict[str, Any]:
    """Config as echoed into output; the destination path does not affect the bytes."""
    doc = cfg.to_dict()
    doc["output"]["path"] = None
    return doc


def _header(cfg: RunConfig, command: str, extra: dict[str, Any] | None = None) -> dict[str, Any]:
    head = {
        "command": command,
        "theta": f"{cfg.angle().theta:.15f}",
        "config": json.dumps(_echo(cfg), sort_keys=True, separators=(",", ":")),
    }
    head.update(extra or {})
    return head


def _csv(head: dict[str, Any], columns: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    for k, v in head.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _json(cfg: RunConfig, command: str, result: Any) -> str:
    doc = {
        "command": command,
        "theta": cfg.angle().theta,
        "config": _echo(cfg),
        "result": result,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _g(x: float) -> str:
    return f"{x:.12g}"


# -- commands -----------------------------------------------------------------


def cmd_amplitudes(cfg: RunConfig) -> str:
    p = cfg.system_params()
    start, stop, count = cfg.resolved_grid("amplitudes")
    ts = np.linspace(start, stop, count) / p.kappa
    amps = np.abs(no_jump_amplitudes_array(p, ts)) ** 2
    pj = np.atleast_1d(survival_probability(p, ts))
    columns = ["t", "abs_x2", "abs_y2", "abs_z2", "P_j"]
    rows = [[_g(t), _g(a), _g(b), _g(c), _g(s)] for t, a, b, c, s in zip(ts, *amps, pj)]
    if cfg.output_format == "json":
        return _json(cfg, "amplitudes", {"columns": columns, "rows": [[float(v) for v in r] for r in rows]})
    return _csv(_header(cfg, "amplitudes"), columns, rows)


def cmd_trajectories(cfg: RunConfig) -> str:
    p = cfg.system_params()
    t_max = cfg.t_max if cfg.t_max is not None else cfg.resolved_taus(p)[0]
    if t_max <= 0:
        raise PreconditionError("trajectory window must be > 0")
    ens = trajectories.simulate_ensemble(p, t_max, cfg.n_traj, cfg.seed)
    frac, se = ens.no_jump_fraction(t_max)
    summary = {
        "t_max": t_max,
        "n": len(ens),
        "no_jump_fraction": frac,
        "stderr": se,
        "survival_probability": survival_probability(p, t_max),
        **{f"count_{ch.value}": n for ch, n in ens.channel_counts(t_max).items()},
    }
    if cfg.output_format == "json":
        rows = list(csv.reader(io.StringIO(ens.to_csv())))[1:]
        return _json(cfg, "trajectories", {"summary": summary, "columns": ["index", "first_jump_time", "channel", "survived"], "rows": rows})
    head = _header(cfg, "trajectories", {k: repr(v) if isinstance(v, float) else v for k, v in summary.items()})
    body = "".join(f"# {k}={v}\n" for k, v in head.items())
    return body + ens.to_csv()


def _label_text(ket, label) -> str:
    return ";".join(f"{k}={v}" for k, v in ket.label_dict(label).items())


def cmd_cascade(cfg: RunConfig) -> str:
    p = cfg.system_params()
    angle = cfg.angle()
    seq = cfg.click_sequence()
    res = run_cascade(p, angle, seq)
    taus = cfg.resolved_taus(p)
    p2 = emission_probability_P2(p, taus)
    fid = res.fidelity_to_target()
    summary = {
        "probability": res.probability,
        "fidelity": fid,
        "emission_probability": p2,
        "taus": list(taus),
        "eta": cfg.eta,
        "total_probability": cfg.eta**4 * res.probability * p2,
    }
    if cfg.output_format == "json":
        return _json(cfg, "cascade", {"summary": summary, **res.to_json()})
    rows = []
    for stage, ket in enumerate(res.intermediate_states, start=1):
        for label, amp in sorted(ket.items()):
            rows.append([stage, _label_text(ket, label), _g(amp.real), _g(amp.imag)])
    if res.decoded is not None:
        for a in range(3):
            for b in range(3):
                amp = res.decoded.amplitudes[a, b]
                if amp != 0:
                    rows.append(["decoded", f"A={a};B={b}", _g(amp.real), _g(amp.imag)])
    head = _header(cfg, "cascade", {
        "sequence": ",".join(d.value for d in seq.clicks),
        "probability": repr(res.probability),
        "fidelity": repr(fid) if fid is not None else "none",
        "emission_probability": repr(p2),
        "total_probability": repr(summary["total_probability"]),
    })
    return _csv(head, ["stage", "label", "re", "im"], rows)


def cmd_outcomes(cfg: RunConfig) -> str:
    p = cfg.system_params()
    outs = enumerate_outcomes(p, cfg.angle())
    target = target_state()
    columns = [d.value for d in DETECTORS] + ["weight", "probability", "fidelity"]
    rows = []
    for o in outs:
        fid = o.decoded.fidelity(target) if o.decoded is not None else None
        rows.append([*o.pattern, repr(o.weight), repr(o.probability), "" if fid is None else repr(fid)])
    if cfg.output_format == "json":
        result = [
            {"pattern": dict(zip(columns[:4], o.pattern)), "weight": o.weight, "probability": o.probability,
             "fidelity": (o.decoded.fidelity(target) if o.decoded is not None else None)}
            for o in outs
        ]
        return _json(cfg, "outcomes", result)
    return _csv(_header(cfg, "outcomes", {"total_weight": repr(sum(o.weight for o in outs))}), columns, rows)


def cmd_sweep(cfg: RunConfig) -> str:
    angle = cfg.angle()
    start, stop, count = cfg.resolved_grid("sweep")
    series, peaks = [], {}
    for i, p in enumerate(cfg.all_series()):
        s = analysis.sweep_ptotal(p, angle, np.linspace(start, stop, count) / p.kappa)
        series.append(s)
        try:
            rep = analysis.peak_report(p, angle, s)
            peaks[i] = rep
        except QutritHeraldError:
            peaks[i] = None
    if cfg.output_format == "json":
        result = []
        for s, rep in zip(series, peaks.values()):
            d = s.to_json()
            d["peak"] = None if rep is None else {**rep.__dict__, "agrees": rep.agrees}
            result.append(d)
        return _json(cfg, "sweep", result)
    head = _header(cfg, "sweep")
    for i, rep in peaks.items():
        if rep is None:
            head[f"series{i}.peak"] = "overdamped: no closed-form optimum"
            continue
        head[f"series{i}.tau_closed_form"] = repr(rep.tau_closed_form)
        head[f"series{i}.tau_grid"] = repr(rep.tau_grid)
        head[f"series{i}.peak_grid"] = repr(rep.peak_grid)
        head[f"series{i}.peak_closed_form"] = repr(rep.peak_closed_form)
        if not rep.agrees:
            head[f"series{i}.warning"] = "grid argmax and closed-form optimum differ by more than one step"
    return analysis.series_to_csv(series, head)


def cmd_fidelity_scan(cfg: RunConfig) -> str:
    key = f"fidelity-scan:{cfg.axis}"
    start, stop, count = cfg.resolved_grid(key)
    xs = np.linspace(start, stop, count)
    if cfg.axis == "theta":
        s = analysis.fidelity_vs_theta(cfg.system_params(), xs)
    else:
        p = cfg.system_params()
        s = analysis.fidelity_vs_lambda_ratio(cfg.angle(), xs, lambda_R=p.lambda_R, kappa=p.kappa,
                                              gamma_l=p.gamma_l, gamma_r=p.gamma_r)
    if cfg.output_format == "json":
        return _json(cfg, "fidelity-scan", s.to_json())
    return analysis.series_to_csv([s], _header(cfg, "fidelity-scan"))


HANDLERS: dict[str, Callable[[RunConfig], str]] = {
    "amplitudes": cmd_amplitudes,
    "trajectories": cmd_trajectories,
    "cascade": cmd_cascade,
    "outcomes": cmd_outcomes,
    "sweep": cmd_sweep,
    "fidelity-scan": cmd_fidelity_scan,
}


# -- plumbing -------------------------------------------------------------------


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--lambda-l", type=float, dest="lambda_L")
    common.add_argument("--lambda-r", type=float, dest="lambda_R")
    common.add_argument("--kappa", type=float)
    common.add_argument("--gamma-l", type=float, dest="gamma_l")
    common.add_argument("--gamma-r", type=float, dest="gamma_r")
    common.add_argument("--theta", help="splitter angle in rad, or 'canonical'")
    common.add_argument("--tau", help="evolution time for all four systems, or 'optimal'")
    common.add_argument("--n-traj", type=int)
    common.add_argument("--t-max", type=float)
    common.add_argument("--grid", help="start:stop:count")
    common.add_argument("--sequence", help="four comma-separated detectors, e.g. Da_F,Db_F,Da_S,Db_S")
    common.add_argument("--lambda", type=float, action="append", dest="lambdas",
                        help="symmetric coupling for one sweep series (repeatable)")
    common.add_argument("--axis", choices=["theta", "ratio"])
    common.add_argument("--eta", type=float, help="detector efficiency")

    parser = argparse.ArgumentParser(prog="qutritherald", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "amplitudes": "no-jump populations |x|^2, |y|^2, |z|^2 and survival probability vs time",
        "trajectories": "quantum-jump ensemble for one atom-cavity system",
        "cascade": "collapse the joint emission state under a four-click record",
        "outcomes": "brute-force distribution over detector occupation patterns",
        "sweep": "total herald probability vs kappa*tau",
        "fidelity-scan": "fidelity vs splitter angle or coupling ratio",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    doc = cfg.to_dict()
    params = dict(doc["params"])
    for key in ("lambda_L", "lambda_R", "kappa", "gamma_l", "gamma_r"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    doc["params"] = params
    if args.lambdas:
        doc["series"] = [{"lambda_L": lam, "lambda_R": lam} for lam in args.lambdas]
    if args.theta is not None:
        doc["theta"] = args.theta if args.theta == "canonical" else _float(args.theta, "--theta")
    if args.tau is not None:
        doc["taus"] = args.tau if args.tau == "optimal" else _float(args.tau, "--tau")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.format is not None:
        doc["output"]["format"] = args.format
    if args.output is not None:
        doc["output"]["path"] = args.output
    if args.n_traj is not None:
        doc["n_traj"] = args.n_traj
    if args.t_max is not None:
        doc["t_max"] = args.t_max
    if args.grid is not None:
        start, stop, count = parse_grid(args.grid)
        doc["grid"] = {"start": start, "stop": stop, "count": count}
    if args.sequence is not None:
        doc["sequence"] = [s.strip() for s in args.sequence.split(",")]
    if args.axis is not None:
        doc["axis"] = args.axis
    if args.eta is not None:
        doc["eta"] = args.eta
    return RunConfig.from_dict(doc)


def _float(text: str, flag: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ConfigError(f"{flag} expects a number, got {text!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{flag} must be finite")
    return val


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        text = HANDLERS[args.command](cfg)
    except (ConfigError, PreconditionError) as exc:
        print(f"qutritherald: {exc}", file=sys.stderr)
        return 2
    except QutritHeraldError as exc:
        print(f"qutritherald: {exc}", file=sys.stderr)
        return 1
    if cfg.output_path:
        write_atomic(cfg.output_path, text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
