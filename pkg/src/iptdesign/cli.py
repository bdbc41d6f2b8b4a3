"""Command-line entry point.

Subcommands::

    design-constants  solve the load-independent design equations
    solve             harmonic steady state of a configured network
    sweep             coupling sweep over the detuning/reactance grid
    oracle            time-domain reference run of a configured network

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration
error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError
from .invdesign import DEFAULT_K_RATIO, solve_class_e, solve_class_ef
from .network import parameter_view
from .optimizer import (SweepSpec, default_detune_grid, default_x_grid, search)
from .solver import solve_network, waveforms
from .tdoracle import steady_state_extract, transient_simulate

__all__ = ["main", "build_parser", "format_number"]

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
WAVEFORM_COLUMNS = ("theta_rad", "v_ds_V", "i_o_A", "v_load_V")


def format_number(v) -> str:
    """Twelve significant digits, ``.`` decimal separator, no grouping."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return format(float(v), ".12g")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_number(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _write_json(path: Path, data):
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _duty(text):
    try:
        d = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < d < 1.0:
        raise argparse.ArgumentTypeError(f"duty must lie in (0, 1), got {d:g}")
    return d


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v:g}")
    return v


def _coupling(text):
    try:
        k = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= k < 1.0:
        raise argparse.ArgumentTypeError(f"coupling must satisfy 0 <= k < 1, got {k:g}")
    return k


def _harmonics(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"harmonics must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iptdesign", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-constants", help="solve the load-independent design equations")
    p.add_argument("--variant", choices=("class-e", "class-ef"), default="class-e")
    p.add_argument("--duty", type=_duty, default=0.5)
    p.add_argument("--k-ratio", type=_positive_float, default=None,
                   help=f"C1/C2 for class-ef (default {DEFAULT_K_RATIO})")
    p.add_argument("--out", type=Path, default=None, help="also write design_constants.json here")

    def common(p, k=True):
        p.add_argument("--config", type=Path, required=True)
        if k:
            p.add_argument("--k", type=_coupling, default=None, help="override topology.k")
        p.add_argument("--out", type=Path, default=None, help="override output.directory")
        p.add_argument("--harmonics", type=_harmonics, default=None,
                       help="override solver.harmonics")

    common(sub.add_parser("solve", help="harmonic steady state and waveform export"))
    p = sub.add_parser("sweep", help="detuned-secondary search over the coupling range")
    common(p, k=False)
    p.add_argument("--verify", action="store_true",
                   help="re-check the top candidates with the time-domain oracle")
    common(sub.add_parser("oracle", help="time-domain reference run"))
    return ap


def _out_dir(cfg: RunConfig, args) -> Path:
    d = Path(args.out) if args.out is not None else Path(cfg.get("output.directory"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _formats(cfg):
    return {f.strip() for f in cfg.get("output.formats").split(",") if f.strip()}


def _harm(cfg, args):
    return args.harmonics if args.harmonics is not None else cfg.get("solver.harmonics")


def _resolved(cfg, args, **extra):
    r = cfg.resolved()
    if getattr(args, "harmonics", None) is not None:
        r["solver"]["harmonics"] = args.harmonics
    if getattr(args, "k", None) is not None:
        r["topology"]["k"] = args.k
    if getattr(args, "out", None) is not None:
        r["output"]["directory"] = str(args.out)
    r.update(extra)
    return r


def cmd_design_constants(args) -> int:
    if args.variant == "class-e":
        dc = solve_class_e(args.duty)
    else:
        dc = solve_class_ef(args.duty, args.k_ratio or DEFAULT_K_RATIO)
    d = dc.as_dict()
    for key in ("variant", "duty", "q", "q2", "k_ratio", "phi", "x_norm_label", "x_norm",
                "zvs_residual", "flatness_residual", "output_constant", "min_vds_over_vin",
                "physical"):
        if key in d:
            print(f"{key} = {format_number(d[key])}")
    if not dc.physical:
        print("warning: drain voltage goes negative over the loading domain", file=sys.stderr)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_json(args.out / "design_constants.json", d)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    net = cfg.network(args.k)
    N = _harm(cfg, args)
    sol = solve_network(net, N, cfg.get("solver.switch_model"),
                        residual_tol=cfg.get("solver.residual_tol"),
                        zvs_samples=cfg.get("solver.waveform_samples"))
    out = _out_dir(cfg, args)
    fmts = _formats(cfg)
    if "csv" in fmts:
        w = waveforms(sol, cfg.get("solver.waveform_samples"))
        _write_csv(out / "waveforms.csv", WAVEFORM_COLUMNS, zip(*(w[c] for c in WAVEFORM_COLUMNS)))
    report = {
        "p_in_W": sol.p_in, "p_out_W": sol.p_out, "efficiency": sol.efficiency,
        "zvs_residual_V": sol.zvs_residual, "N": N, "residual": sol.residual,
        "condition_estimate": sol.condition_estimate, "i0_amplitude_A": sol.i0_amplitude,
        "losses_W": dict(sol.losses), "v_ds_rms_V": sol.v_ds.rms(),
        "network": dict(parameter_view(net)), "config": _resolved(cfg, args),
    }
    if "json" in fmts:
        _write_json(out / "report.json", report)
    print(f"p_in = {format_number(sol.p_in)} W, p_out = {format_number(sol.p_out)} W, "
          f"efficiency = {format_number(sol.efficiency)}, "
          f"zvs_residual = {format_number(sol.zvs_residual)} V")
    return EXIT_OK


def _x_center(cfg, net):
    x = cfg.get("sweep.x_center")
    if x is not None:
        return x
    duty = net.switch.duty
    if net.variant == "class_e":
        return solve_class_e(duty).x_over_wl1 * net.omega * net.l1
    dc = solve_class_ef(duty, net.c1 / net.c2)
    return dc.x_over_wl1 / (net.omega * net.c1)


def sweep_spec_from_config(cfg: RunConfig, net) -> SweepSpec:
    deltas = default_detune_grid(cfg.get("sweep.delta_min"), cfg.get("sweep.delta_max"),
                                 cfg.get("sweep.delta_steps"))
    xs = default_x_grid(_x_center(cfg, net), cfg.get("sweep.x_span"), cfg.get("sweep.x_steps"))
    try:
        return SweepSpec(cfg.get("sweep.k_min"), cfg.get("sweep.k_max"), cfg.get("sweep.k_steps"),
                         deltas, xs)
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: sweep: {exc}") from None


def _oracle_deviation(cfg, net, cand):
    tuned = net.with_secondary(delta=cand.delta, x=cand.x)
    worst = 0.0
    for k, p_hb in zip(cand.ks, cand.power):
        run = transient_simulate(tuned.with_coupling(float(k)), cfg.get("oracle.cycles"),
                                 cfg.get("oracle.steps_per_cycle"), cfg.get("oracle.tol"))
        p_td = steady_state_extract(run).p_out
        worst = max(worst, abs(p_hb - p_td) / p_td if p_td > 0 else abs(p_hb - p_td))
    return worst


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    net = cfg.network()
    N = _harm(cfg, args)
    spec = sweep_spec_from_config(cfg, net)
    res = search(net, spec, N, cfg.get("solver.switch_model"), cfg.get("sweep.workers"))
    out = _out_dir(cfg, args)
    cands = res.candidates
    header = ["delta", "x_ohm", "beta_fluct", "mean_eff", "reflected_sign"]
    dev = {}
    if args.verify:
        header.append("oracle_p_out_dev")
        for c in cands[: max(cfg.get("sweep.verify_top"), 0)]:
            dev[id(c)] = _oracle_deviation(cfg, net, c)
    rows = []
    for c in cands:
        row = [c.delta, c.x, c.beta_fluct, c.mean_efficiency, c.reflected_sign]
        if args.verify:
            row.append(dev.get(id(c), ""))
        rows.append(row)
    _write_csv(out / "candidates.csv", header, rows)
    _write_csv(out / "curves.csv", ["delta", "x_ohm", "k", "p_out_W", "efficiency"],
               ([c.delta, c.x, k, p, e] for c in cands
                for k, p, e in zip(c.ks, c.power, c.efficiency)))
    plot = out / "plot_data"
    plot.mkdir(exist_ok=True)
    for rank, c in enumerate(cands):
        name = f"rank{rank:04d}_delta{c.delta:.6g}_x{c.x:.6g}.dat"
        lines = [f"# k p_out_W  (delta={format_number(c.delta)}, x_ohm={format_number(c.x)})"]
        lines += [f"{format_number(k)} {format_number(p)}" for k, p in zip(c.ks, c.power)]
        (plot / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def summary(c):
        return {"delta": c.delta, "x_ohm": c.x, "beta_fluct": c.beta_fluct,
                "mean_eff": c.mean_efficiency, "reflected_ohm": c.reflected,
                "reflected_sign": c.reflected_sign, "k": list(c.ks), "p_out_W": list(c.power),
                "efficiency": list(c.efficiency), "argmax_k": float(c.ks[int(np.argmax(c.power))])}

    if "json" in _formats(cfg):
        _write_json(out / "sweep_report.json", {
            "top": summary(res.top), "reference_configured_c_rx": summary(res.reference),
            "candidates_evaluated": len(cands), "N": N,
            "oracle_p_out_dev": {f"{c.delta:.12g},{c.x:.12g}": dev[id(c)]
                                 for c in cands if id(c) in dev},
            "config": _resolved(cfg, args),
        })
    t = res.top
    print(f"top candidate: delta = {format_number(t.delta)}, x = {format_number(t.x)} ohm, "
          f"beta_fluct = {format_number(t.beta_fluct)}, reflected {t.reflected_sign}")
    r = res.reference
    print(f"configured C_rx (delta = {format_number(r.delta)}): "
          f"beta_fluct = {format_number(r.beta_fluct)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    net = cfg.network(args.k)
    run = transient_simulate(net, cfg.get("oracle.cycles"), cfg.get("oracle.steps_per_cycle"),
                             cfg.get("oracle.tol"))
    out = _out_dir(cfg, args)
    report = {"cycles": run.cycles, "periodicity_residual": run.residual,
              "converged": run.converged, "residual_history": list(run.history),
              "steps_per_cycle": run.steps_per_cycle, "config": _resolved(cfg, args)}
    if run.converged:
        ss = steady_state_extract(run)
        cols = ss.as_columns()
        _write_csv(out / "trajectory.csv", WAVEFORM_COLUMNS, zip(*(cols[c] for c in WAVEFORM_COLUMNS)))
        report.update(p_in_W=ss.p_in, p_out_W=ss.p_out, efficiency=ss.efficiency,
                      losses_W=ss.losses, v_ds_turn_on_V=ss.v_ds_turn_on, v_ds_rms_V=ss.v_ds_rms)
    _write_json(out / "oracle_report.json", report)
    if not run.converged:
        print(f"error: no periodic steady state after {run.cycles} cycles "
              f"(residual {run.residual:.3g})", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"converged after {run.cycles} cycles, residual {run.residual:.3g}; "
          f"p_in = {format_number(ss.p_in)} W, p_out = {format_number(ss.p_out)} W")
    return EXIT_OK


_COMMANDS = {"design-constants": cmd_design_constants, "solve": cmd_solve,
             "sweep": cmd_sweep, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
