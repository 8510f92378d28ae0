"""Command-line entry point.

Every subcommand reads one JSON config (merged over built-in defaults),
writes delimited text to ``--out`` or stdout, and exits 0 on success, 2 on a
config problem, 3 on a numerical failure.  Identical configs produce
byte-identical output files; when ``--out`` is given the sweep, convergence
and simulate commands also render a PNG next to the data file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .experiments import (
    CONVERGENCE_COLUMNS,
    POINT_COLUMNS,
    SWEEP_COLUMNS,
    ExperimentConfig,
    run_convergence,
    run_simulate,
    run_sweep_splay,
    run_sweep_sync,
    splay_rows_for_k,
    sync_rows_at_point,
    write_csv,
    write_table,
)
from .hypergraph import check_decomposition, decompose, decomposition_doc, export_json
from .model import DomainError
from .reduction import ReductionOrder, assemble
from .stability import StabilityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

DEFAULT_CONFIG = {
    "omega": 1.0,
    "m": -1.0,
    "alpha": math.pi / 2 + 0.05,
    "K": 0.1,
    "delta": 0.0,
    "N": 3,
    "g": [{"n": 1, "b": 1.0}],
    "adjacency": "all_to_all",
}

# positive geometric coupling ladder; the sweep default would start at K<0
CONVERGENCE_GRID = {
    "delta": {"values": [0.0, 0.1]},
    "K": {"start": 0.05, "stop": 0.15, "steps": 4, "scale": "geometric"},
}


class ConfigError(Exception):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    return user


def _experiment(args, default_grid=None) -> ExperimentConfig:
    cfg = {**DEFAULT_CONFIG, **_load_config(args.config)}
    if default_grid is not None and "grid" not in cfg:
        cfg["grid"] = default_grid
    return ExperimentConfig.from_dict(cfg, tol=args.tol, threads=args.threads,
                                      seed=args.seed)


def _open_out(args):
    if args.out is None:
        return sys.stdout, False
    return open(args.out, "w", encoding="utf-8", newline=""), True


def _emit_csv(args, columns, rows) -> None:
    stream, close = _open_out(args)
    try:
        write_csv(stream, columns, rows)
    finally:
        if close:
            stream.close()


def _figure_path(args) -> Path | None:
    return None if args.out is None else Path(args.out).with_suffix(".png")


def _emit_json(args, doc) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = _experiment(args)
    header, matrix = run_simulate(config)
    stream, close = _open_out(args)
    try:
        write_table(stream, header, matrix)
    finally:
        if close:
            stream.close()
    fig = _figure_path(args)
    if fig is not None:
        from .report import trajectory_figure
        trajectory_figure(header, matrix, fig)
    return EXIT_OK


def cmd_reduce(args) -> int:
    config = _experiment(args)
    order = ReductionOrder.parse(str(config.extras.get("system", "(2,2)")))
    if order.exact_delta:
        raise DomainError("term export needs a finite shape order; "
                          "the exact-shape reduction is not polynomial")
    system = assemble(config.network, config.params, config.shape, order)
    from .model import config_dict
    terms = []
    for (n, j) in sorted(system.p_terms):
        polys = system.p_terms[(n, j)]
        terms.append({"power_K": n, "power_delta": j,
                      "per_oscillator": [poly.to_dict() for poly in polys]})
    doc = {"system": str(order), "n_oscillators": config.network.n,
           "params": config_dict(config.params, config.shape, config.network),
           "terms": terms}
    _emit_json(args, doc)
    return EXIT_OK


def _point_exit(rows) -> int:
    ok = all(r["converged"] for r in rows)
    if not ok:
        for r in rows:
            if not r["converged"]:
                print(f"{r['system']}: {r['reason']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_NUMERICS


def cmd_floquet_sync(args) -> int:
    config = _experiment(args)
    p = config.params
    rows = sync_rows_at_point(config, p.delta, p.K)
    _emit_csv(args, POINT_COLUMNS, rows)
    return _point_exit(rows)


def cmd_floquet_splay(args) -> int:
    config = _experiment(args)
    p = config.params
    from dataclasses import replace
    single = replace(config, delta_grid=(p.delta,), k_grid=(p.K,))
    if config.network.n != 3:
        raise DomainError("splay analysis is restricted to three oscillators")
    keyed = splay_rows_for_k(single, p.K)
    rows = [keyed[(p.delta, name)] for name in config.systems]
    _emit_csv(args, POINT_COLUMNS, rows)
    return _point_exit(rows)


def cmd_sweep_sync(args) -> int:
    config = _experiment(args)
    rows = run_sweep_sync(config)
    _emit_csv(args, SWEEP_COLUMNS, rows)
    fig = _figure_path(args)
    if fig is not None:
        from .report import sweep_figure
        sweep_figure(rows, fig, "sync critical multiplier")
    return EXIT_OK


def cmd_sweep_splay(args) -> int:
    config = _experiment(args)
    rows = run_sweep_splay(config)
    _emit_csv(args, SWEEP_COLUMNS, rows)
    fig = _figure_path(args)
    if fig is not None:
        from .report import sweep_figure
        sweep_figure(rows, fig, "splay critical multiplier")
    return EXIT_OK


def cmd_convergence(args) -> int:
    config = _experiment(args, default_grid=CONVERGENCE_GRID)
    rows = run_convergence(config)
    _emit_csv(args, CONVERGENCE_COLUMNS, rows)
    fig = _figure_path(args)
    if fig is not None:
        from .report import convergence_figure
        convergence_figure(rows, fig)
    return EXIT_OK


def cmd_hypergraph(args) -> int:
    config = _experiment(args)
    decomp = decompose(config.network)
    if args.out is None:
        _emit_json(args, decomposition_doc(decomp, config.params))
    else:
        export_json(decomp, args.out, config.params)
    if args.check:
        dev = check_decomposition(config.network, config.params,
                                  seed=config.seed)
        check_tol = 1e-12 if args.tol is None else float(args.tol)
        print(f"max deviation from direct second-order coupling: {dev:.3e}")
        if not dev < check_tol:
            print(f"exceeds tolerance {check_tol:.3e}", file=sys.stderr)
            return EXIT_NUMERICS
    return EXIT_OK


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="JSON", default=None,
                        help="config file; keys missing fall back to defaults")
    shared.add_argument("--out", metavar="PATH", default=None,
                        help="output file (stdout when omitted)")
    shared.add_argument("--tol", type=float, default=None,
                        help="integrator / check tolerance")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker processes for sweeps")
    shared.add_argument("--seed", type=int, default=None,
                        help="seed for random phase sampling")

    parser = argparse.ArgumentParser(
        prog="phasered",
        description="Phase reductions of coupled oscillators with "
                    "phase-dependent limit-cycle shape: construction, "
                    "verification, orbit stability, interaction structure.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[shared],
                        help="integrate one system and tabulate the trajectory")
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("reduce", parents=[shared],
                        help="emit the assembled phase-model terms as JSON")
    sp.set_defaults(func=cmd_reduce)
    sp = sub.add_parser("floquet-sync", parents=[shared],
                        help="return-map multipliers of the synchronized "
                             "orbit at one parameter point")
    sp.set_defaults(func=cmd_floquet_sync)
    sp = sub.add_parser("floquet-splay", parents=[shared],
                        help="return-map multipliers of the splay orbit at "
                             "one parameter point")
    sp.set_defaults(func=cmd_floquet_splay)
    sp = sub.add_parser("sweep-sync", parents=[shared],
                        help="sync multiplier over the (delta, K) grid")
    sp.set_defaults(func=cmd_sweep_sync)
    sp = sub.add_parser("sweep-splay", parents=[shared],
                        help="continued splay multiplier over the grid")
    sp.set_defaults(func=cmd_sweep_splay)
    sp = sub.add_parser("convergence", parents=[shared],
                        help="reduction error decay orders against coupling")
    sp.set_defaults(func=cmd_convergence)
    sp = sub.add_parser("hypergraph", parents=[shared],
                        help="export the second-order interaction structure")
    sp.add_argument("--check", action="store_true",
                    help="verify the exported classes re-sum to the direct "
                         "second-order coupling")
    sp.set_defaults(func=cmd_hypergraph)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except BrokenPipeError:
        # downstream pager/head closed the pipe; not an error of ours
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
