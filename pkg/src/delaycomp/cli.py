"""Command-line front end: scenario files in, CSV and report files out.

Exit codes: 0 success (or all checks passed), 1 condition failure from
check-gains, 2 usage or config error, 3 numerical divergence. CSV cells
carry 17 significant digits so golden files round-trip exactly; rows end in
LF on every platform.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

from .gains import ConditionReport, evaluate_conditions
from .scenario import Scenario, ScenarioError, load_scenario
from .sim import (EXIT_DIVERGED, EXIT_OK, SimResult, SweepRow, run, sweep,
                  apply_axis)

EXIT_CONDITIONS = 1
EXIT_USAGE = 2


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _vec_cols(name: str, n: int) -> list[str]:
    return [f"{name}{i + 1}" for i in range(n)]


def state_header(n: int) -> list[str]:
    cols = ["t"]
    for name in ("x", "xdot", "xd", "pos_err", "filt_err", "u", "input_err"):
        cols += _vec_cols(name, n)
    cols += ["tau_input", "tau_state"]
    return cols


def monitor_header(n: int) -> list[str]:
    cols = ["t"]
    for name in ("pos_err", "filt_err", "aux_err", "input_err", "nd"):
        cols += _vec_cols(name, n)
    cols += ["in_energy", "in_energy_dbl", "state_energy", "state_energy_dbl",
             "z_norm", "y_norm", "v_lyap", "vdot_fd", "decay_ok",
             "inside_safe"]
    return cols


SWEEP_HEADER = ["value", "verdict", "steady_y_norm", "max_pos_err_tail",
                "error"]


def write_state_csv(path: Path, res: SimResult) -> None:
    n = res.config.plant.n
    blocks = (res.x, res.xdot, res.ref_pos, res.pos_err, res.filt_err,
              res.u, res.input_err)

    def rows():
        for k in range(len(res.t)):
            row = [_fmt(res.t[k])]
            for block in blocks:
                row += [_fmt(val) for val in block[k]]
            row += [_fmt(res.tau_input[k]), _fmt(res.tau_state[k])]
            yield row

    _write_csv(path, state_header(n), rows())


def write_monitor_csv(path: Path, res: SimResult) -> None:
    log = res.monitor
    if log is None:
        raise ValueError("run has no monitor output")
    a = log.arr
    n = log.n

    def rows():
        for k in range(len(a["t"])):
            row = [_fmt(a["t"][k])]
            for name in ("pos_err", "filt_err", "aux_err", "input_err", "nd"):
                row += [_fmt(val) for val in a[name][k]]
            row += [_fmt(a[name][k]) for name in
                    ("in_energy", "in_energy_dbl", "state_energy",
                     "state_energy_dbl", "z_norm", "y_norm", "v_lyap",
                     "vdot_fd")]
            row += [str(int(a["decay_ok"][k])), str(int(a["inside_safe"][k]))]
            yield row

    _write_csv(path, monitor_header(n), rows())


def write_sweep_csv(path: Path, table: list[SweepRow]) -> None:
    rows = [[_fmt(r.value), r.verdict, _fmt(r.steady_y_norm),
             _fmt(r.max_pos_err_tail), r.error] for r in table]
    _write_csv(path, SWEEP_HEADER, rows)


def _condition_lines(reports: list[ConditionReport]) -> list[str]:
    lines = []
    for r in reports:
        tag = "PASS" if r.passed else "FAIL"
        extra = f"  [{r.note}]" if r.note else ""
        lines.append(f"{tag}  {r.name}: value={r.value:.6g} "
                     f"threshold={r.threshold:.6g} "
                     f"margin={r.margin:.6g}{extra}")
    return lines


def report_pairs(res: SimResult) -> list[tuple[str, str]]:
    """Flat key=value view of a run, shared by report.kv and report.txt."""
    conds = res.conditions
    pairs = [
        ("verdict", res.verdict),
        ("exit_status", str(res.exit_status)),
        ("diverged", str(res.diverged).lower()),
        ("steps_recorded", str(len(res.t) - 1)),
        ("t_final", _fmt(res.t[-1])),
        ("clamped_lookups", str(res.clamped_lookups)),
        ("pruned_samples", str(res.pruned_samples)),
        ("labels", "; ".join(res.labels)),
        ("conditions_passed", str(conds.all_passed).lower()),
        ("regime", "global" if conds.global_regime else "local"),
        ("sigma", _fmt(conds.sigma)),
        ("delta", _fmt(conds.delta)),
        ("ultimate_bound", _fmt(conds.bound)),
        ("validity_radius", _fmt(conds.radius)),
        ("safe_start_radius", _fmt(conds.safe_radius)),
    ]
    for rep in list(conds.gain_checks) + [conds.delay_check1,
                                          conds.delay_check2]:
        key = "condition." + rep.name.replace(" ", "_")
        pairs.append((key, ("PASS" if rep.passed else "FAIL")
                      + f" margin={rep.margin:.6g}"))
    cert = res.certification
    if cert is not None:
        first_entry = (_fmt(cert.first_entry_time)
                       if cert.first_entry_time is not None else "never")
        pairs += [
            ("cert.decay_violations", str(cert.decay_violations)),
            ("cert.decay_checked", str(cert.decay_checked)),
            ("cert.bound", _fmt(cert.bound)),
            ("cert.decay_radius", _fmt(cert.decay_radius)),
            ("cert.first_entry_time", first_entry),
            ("cert.stays_within", str(cert.stays_within).lower()),
            ("cert.start_in_safe_region",
             str(cert.start_in_safe_region).lower()),
            ("cert.left_region", str(cert.left_region).lower()),
            ("cert.nd_sup", _fmt(cert.nd_sup)),
            ("cert.nd_bound_used", _fmt(cert.nd_bound_used)),
            ("cert.nd_bound_estimated", str(cert.nd_bound_estimated).lower()),
            ("cert.nd_bound_ok", str(cert.nd_bound_ok).lower()),
            ("cert.residual_max_ratio", _fmt(cert.residual_max_ratio)),
            ("cert.residual_ok", str(cert.residual_ok).lower()),
            ("cert.sandwich_ok", str(cert.sandwich_ok).lower()),
            ("cert.embedding_ok", str(cert.embedding_ok).lower()),
            ("cert.input_energy_ok", str(cert.input_energy_ok).lower()),
            ("cert.diagnostics", " | ".join(cert.diagnostics)),
        ]
    return pairs


def write_reports(out_dir: Path, res: SimResult) -> None:
    pairs = report_pairs(res)
    with open(out_dir / "report.kv", "w", newline="\n") as fh:
        for key, val in pairs:
            fh.write(f"{key}={val}\n")
    width = max(len(k) for k, _ in pairs)
    with open(out_dir / "report.txt", "w", newline="\n") as fh:
        fh.write("# simulation report\n")
        for key, val in pairs:
            fh.write(f"{key.ljust(width)} = {val}\n")


def _load(path: str) -> Scenario:
    return load_scenario(path)


def cmd_check_gains(args) -> int:
    scn = _load(args.config)
    cfg = scn.config
    nd = cfg.bounding.nd_bound
    if nd is None:
        print("note: no declared residual-rate bound; "
              "bound-dependent checks use 0")
        nd = 0.0
    conds = evaluate_conditions(cfg.gains, cfg.bounds, cfg.bounding, nd)
    print(f"regime: {'global' if conds.global_regime else 'local'}")
    for line in _condition_lines(list(conds.gain_checks)
                                 + [conds.delay_check1, conds.delay_check2]):
        print(line)
    print(f"sigma = {conds.sigma:.10g}")
    print(f"delta = {conds.delta:.10g}")
    print(f"ultimate_bound = {conds.bound:.10g}")
    print(f"decay_active_radius = {conds.bound / math.sqrt(2):.10g}")
    print(f"validity_radius = {conds.radius:.10g}")
    print(f"safe_start_radius = {conds.safe_radius:.10g}")
    if conds.all_passed:
        print("all conditions satisfied")
        return EXIT_OK
    print("one or more conditions FAILED")
    return EXIT_CONDITIONS


def cmd_simulate(args) -> int:
    scn = _load(args.config)
    cfg = scn.config
    if args.no_monitor:
        from dataclasses import replace
        cfg = replace(cfg, monitor_enabled=False)
    out_dir = Path(args.out if args.out is not None else scn.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = run(cfg)
    write_state_csv(out_dir / "state.csv", res)
    if res.monitor is not None:
        write_monitor_csv(out_dir / "monitor.csv", res)
    write_reports(out_dir, res)
    print(f"verdict: {res.verdict}")
    for label in res.labels:
        print(f"label: {label}")
    print(f"wrote {out_dir}/state.csv"
          + ("" if res.monitor is None else f", {out_dir}/monitor.csv")
          + f", {out_dir}/report.txt, {out_dir}/report.kv")
    if res.diverged:
        print(f"divergence at t={res.t[-1]:.6g}; partial results retained",
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    vals = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            vals.append(float(part))
        except ValueError:
            raise ScenarioError(f"bad sweep value {part!r}")
    return vals


def cmd_sweep(args) -> int:
    scn = _load(args.config)
    values = _parse_values(args.values)
    if not values:
        print("error: no sweep values given", file=sys.stderr)
        return EXIT_USAGE
    try:
        apply_axis(scn.config, args.axis, values[0])
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    table = sweep(scn.config, args.axis, values)
    out_dir = Path(args.out if args.out is not None else scn.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out_dir / "sweep.csv", table)
    for row in table:
        print(f"{args.axis}={row.value:g}: {row.verdict}"
              + (f" ({row.error})" if row.error else ""))
    print(f"wrote {out_dir}/sweep.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaycomp",
        description="Simulation and certification for tracking control "
                    "with input and state delays.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-gains",
                       help="evaluate the gain and delay-size conditions")
    p.add_argument("config", help="scenario TOML file")
    p.set_defaults(func=cmd_check_gains)

    p = sub.add_parser("simulate", help="run one scenario")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--out", help="output directory (default from [output])")
    p.add_argument("--no-monitor", action="store_true",
                   help="skip the analysis monitor and certification")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a scenario over one config axis")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--axis", required=True,
                   help="config key, e.g. controller.input_delay_scale")
    p.add_argument("--values", required=True,
                   help="comma-separated numbers")
    p.add_argument("--out", help="output directory (default from [output])")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 for --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
