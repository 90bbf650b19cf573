"""Command-line interface.

Subcommands:
  simulate  Monte Carlo sweep with the PHY or collision-model engine
  bounds    closed-form loss floor and no-SIC benchmarks over a sweep
  verify    built-in per-module verification suites
  trace     single PHY frame with a line-oriented decode-event log
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import analysis, selfcheck
from .core import ConfigError, DegreeDistribution, ReceiverMode, load_config, validate_config
from .harness import (
    CSV_HEADER,
    Engine,
    SweepSpec,
    parse_sweep,
    run_sweep,
    run_trial,
    trial_rng,
    write_csv,
)


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _load(args) -> "ProtocolConfig":
    cfg = load_config(args.config)
    if getattr(args, "mode", None):
        cfg = validate_config(
            dataclasses.replace(cfg, receiver_mode=ReceiverMode(args.mode))
        )
    return cfg


def _check_sweep_variable(name: str, framed: bool) -> None:
    if framed and name != "k_a":
        raise ValueError("framed configs sweep k_a (active users per frame)")
    if not framed and name != "k_s":
        raise ValueError("unframed configs sweep k_s (active users per slot)")


def cmd_simulate(args) -> int:
    cfg = _load(args)
    name, values = parse_sweep(args.sweep)
    _check_sweep_variable(name, cfg.framed)
    spec = SweepSpec(
        base=cfg,
        sweep_variable=name,
        values=values,
        trials=args.trials,
        master_seed=args.seed,
        engine=Engine(args.engine),
        min_loss_events=args.min_loss_events,
        genie_codec=args.genie,
    )
    estimates = run_sweep(spec, workers=args.workers)
    out, close = _open_out(args.out)
    try:
        write_csv(estimates, cfg, name, out)
    finally:
        if close:
            out.close()
    return 0


def _bounds_rows(cfg, name: str, values, p_orders) -> list[str]:
    scenario = (
        analysis.Scenario.FRAMED_NESTED if cfg.framed else analysis.Scenario.SLOTTED_UNFRAMED
    )
    r = cfg.lam.degrees[0] if cfg.lam.is_concentrated else None
    rows = []
    for value in values:
        variants = (
            [(p, DegreeDistribution.concentrated(p)) for p in p_orders]
            if p_orders
            else [(None, cfg.psi)]
        )
        for p, psi in variants:
            cells_common = [
                Engine.ANALYSIS.value,
                None,  # quantity, filled per row
                str(cfg.n_slots),
                str(cfg.n_pilots),
                str(cfg.n_antennas),
                cfg.lam.pgf_str(),
                psi.pgf_str(),
                f"{cfg.snr_db:g}",
                name,
                str(value),
                "0",
                "0",
                "0",
                None,  # plr
                None,
                None,
                "0.000",
            ]
            if r is not None and (p is not None or cfg.psi.is_concentrated):
                query = analysis.BoundQuery(
                    scenario,
                    n_pilots=cfg.n_pilots,
                    p=p if p is not None else cfg.psi.degrees[0],
                    n_users=value,
                    r=r,
                    n_slots=cfg.n_slots if cfg.framed else None,
                )
                floor = analysis.plr_lower_bound(query)
                cells = cells_common.copy()
                cells[1] = "floor"
                cells[13] = cells[14] = cells[15] = f"{floor:.9g}"
                rows.append(",".join(cells))
            if cfg.framed:
                nosic = analysis.plr_framed_nosic(
                    cfg.lam, psi, cfg.n_slots, cfg.n_pilots, value
                )
            else:
                nosic = analysis.plr_slotted_nosic(psi, cfg.n_pilots, value)
            cells = cells_common.copy()
            cells[1] = "nosic"
            cells[13] = cells[14] = cells[15] = f"{nosic:.9g}"
            rows.append(",".join(cells))
    return rows


def cmd_bounds(args) -> int:
    cfg = _load(args)
    name, values = parse_sweep(args.sweep)
    _check_sweep_variable(name, cfg.framed)
    p_orders = (
        tuple(int(p) for p in args.p_orders.split(",")) if args.p_orders else None
    )
    rows = _bounds_rows(cfg, name, values, p_orders)
    out, close = _open_out(args.out)
    try:
        out.write(CSV_HEADER + "\n")
        for row in rows:
            out.write(row + "\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_verify(args) -> int:
    results = selfcheck.run_all(args.seed)
    failed = 0
    for module, check_name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail and not ok else ""
        print(f"{status} {module}: {check_name}{suffix}")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_trace(args) -> int:
    cfg = _load(args)
    result = run_trial(
        cfg,
        args.k,
        trial_rng(args.seed, args.k, 0),
        engine=Engine.PHY,
        collect_trace=True,
    )
    out, close = _open_out(args.out)
    try:
        for event in result.frame.trace:
            out.write(event.line(trial=0) + "\n")
    finally:
        if close:
            out.close()
    print(
        f"resolved {len(result.resolved)}/{result.sent} users, "
        f"{len(result.frame.trace)} decode events",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilotmix",
        description="Coded-random-access simulator with pilot-mixture preambles and nested SIC",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo sweep (PHY or collision engine)")
    sim.add_argument("--config", required=True, help="protocol config JSON")
    sim.add_argument("--mode", choices=[m.value for m in ReceiverMode], help="override receiver mode")
    sim.add_argument(
        "--engine", default=Engine.PHY.value,
        choices=[Engine.PHY.value, Engine.COLLISION_ORACLE.value],
    )
    sim.add_argument("--sweep", required=True, help="e.g. k_a=100:2400:100 or k_s=4,8,16")
    sim.add_argument("--trials", type=int, default=1000, help="trial budget per swept value")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--out", help="CSV output path (default stdout)")
    sim.add_argument(
        "--min-loss-events", type=int, default=100,
        help="stop a swept value early after this many losses",
    )
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument(
        "--genie", action="store_true",
        help="genie codec shortcut (distance-based validity, skips BCH/CRC)",
    )
    sim.set_defaults(func=cmd_simulate)

    bounds = sub.add_parser("bounds", help="closed-form floor and no-SIC benchmarks")
    bounds.add_argument("--config", required=True)
    bounds.add_argument("--mode", choices=[m.value for m in ReceiverMode])
    bounds.add_argument("--sweep", required=True)
    bounds.add_argument(
        "--p-orders", help="comma list of preamble orders to evaluate, e.g. 1,2"
    )
    bounds.add_argument("--out")
    bounds.set_defaults(func=cmd_bounds)

    verify = sub.add_parser("verify", help="run built-in per-module checks")
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(func=cmd_verify)

    trace = sub.add_parser("trace", help="single PHY frame with decode-event log")
    trace.add_argument("--config", required=True)
    trace.add_argument("--mode", choices=[m.value for m in ReceiverMode])
    trace.add_argument("--k", type=int, required=True, help="active users in the frame")
    trace.add_argument("--seed", type=int, default=0)
    trace.add_argument("--out")
    trace.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
