"""Command-line front end: ``mocu quad``, ``mocu grn`` and ``mocu steady``.

Every output file gets a ``<name>.meta.json`` sidecar recording the package
version, seed, resolved configuration and the argument vector that
reproduces it. Exit status is 0 on success, 2 for configuration errors and 3
for computation failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, bnp, cellcycle, quadratic
from .core import DEFAULT_SEED
from .errors import ConvergenceError, EvaluationError, InvalidArgumentError, LoadError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
OUTPUT_ENV = "MOCU_OUTPUT_DIR"

CASE_DEFAULTS = {
    1: {"c": "1,3,5", "d": "0", "delta": "0:3:0.5"},
    2: {"c": "1", "d": "0,1,2,3", "delta": "0:3:0.5"},
    3: {"c": "1:5:1", "d": "0:5:1", "delta": "1"},
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_grid(text: str) -> list[float]:
    """Comma list whose items are numbers or inclusive ``start:stop:step`` ranges."""
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ":" in item:
                start, stop, step = (float(x) for x in item.split(":"))
                if step <= 0 or stop < start:
                    raise ConfigError(f"bad range {item!r}: need step > 0 and stop >= start")
                count = int(math.floor((stop - start) / step + 1e-9)) + 1
                values.extend(round(start + i * step, 12) for i in range(count))
            else:
                values.append(float(item))
        except ValueError:
            raise ConfigError(f"cannot parse grid item {item!r}") from None
    if not values:
        raise ConfigError(f"empty grid {text!r}")
    return values


def parse_int_list(text: str) -> list[int]:
    """Comma list of integers, ``a-b`` or ``a:b[:step]`` inclusive ranges."""
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ":" in item:
                parts = [int(x) for x in item.split(":")]
                start, stop, step = (parts + [1])[:3]
                if step <= 0:
                    raise ConfigError(f"bad range {item!r}")
                values.extend(range(start, stop + 1, step))
            elif "-" in item[1:]:
                start, stop = (int(x) for x in item.split("-", 1))
                values.extend(range(start, stop + 1))
            else:
                values.append(int(item))
        except ValueError:
            raise ConfigError(f"cannot parse integer item {item!r}") from None
    if not values:
        raise ConfigError(f"empty integer list {text!r}")
    return values


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return "" if value is None else str(value)


# ---------------------------------------------------------------------------
# output


def output_dir(arg: str | None) -> Path:
    path = Path(arg or os.environ.get(OUTPUT_ENV) or "mocu-results")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def write_meta(path: Path, command: str, argv: list[str], seed, config: dict) -> None:
    meta = {
        "tool": "mocu",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "config": config,
    }
    Path(f"{path}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_table(path_stem: Path, fmt_name: str, columns, rows, command, argv, seed, config) -> Path:
    if fmt_name == "json":
        path = path_stem.with_suffix(".json")
        write_json(path, [{c: row.get(c) for c in columns} for row in rows])
    else:
        path = path_stem.with_suffix(".csv")
        write_csv(path, columns, rows)
    write_meta(path, command, argv, seed, config)
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_quad(args, argv) -> int:
    defaults = CASE_DEFAULTS[args.case]
    grids = {name: parse_grid(getattr(args, name) or defaults[name]) for name in ("c", "d", "delta")}
    try:
        config = quadratic.CaseConfig(
            args.case,
            c=tuple(grids["c"]),
            d=tuple(grids["d"]),
            delta=tuple(grids["delta"]),
            theta_samples=args.samples,
            lambda_grid=args.lambda_grid,
            seed=args.seed,
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    out = output_dir(args.out)
    rows = quadratic.run_case(config)
    columns = list(quadratic.CASE_AXES[args.case]) + ["eta_multi", "theta_samples", "lambda_grid", "seed"]
    if args.case in (1, 2):
        for row, point in zip(rows, config.grid()):
            row.update(quadratic.parameter_measures(args.case, point["c"], point["d"], point["delta"]))
        columns += ["param_entropy", "param_variance"]
    config_doc = asdict(config)
    path = write_table(out / f"quad_case{args.case}", args.format, columns, rows, "quad", argv, args.seed, config_doc)
    print(f"wrote {path} ({len(rows)} rows)")

    if args.g_curve:
        lambdas = parse_grid(args.g_lambdas)
        xs = parse_grid(args.g_x)
        curve_rows = []
        for panel, (g1, g2) in (("A", (5.0, 5.0)), ("B", (2.0, 7.0))):
            for lam, x, g in quadratic.emit_g_curve(g1, g2, 1.0, 3.0, lambdas, xs):
                curve_rows.append({"panel": panel, "gamma1": g1, "gamma2": g2, "lambda": lam, "x": x, "g": g})
        curve_cfg = {"alpha1": 1.0, "alpha2": 3.0, "lambdas": lambdas, "x": [xs[0], xs[-1], len(xs)]}
        path = write_table(
            out / "g_curve", args.format, ["panel", "gamma1", "gamma2", "lambda", "x", "g"], curve_rows,
            "quad", argv, args.seed, curve_cfg,
        )
        print(f"wrote {path} ({len(curve_rows)} rows)")
    return EXIT_OK


def _load_network_arg(path):
    spec = cellcycle.CellCycleSpec(path=path)
    if path is None:
        return cellcycle.load_network(spec)
    network, _ = bnp.read_network_file(path)
    if network.genes == cellcycle.CELL_CYCLE_GENES:
        return cellcycle.load_network(spec)
    if network.has_unknown:
        raise LoadError(f"{path}: network contains edges of unknown sign")
    return network


def cmd_grn(args, argv) -> int:
    network = _load_network_arg(args.network)
    try:
        config = cellcycle.ExperimentConfig(
            k_values=tuple(parse_int_list(args.k)),
            runs=args.runs,
            lambda_grid=args.lambda_grid,
            seed=args.seed,
            workers=cellcycle.worker_count(args.workers),
            allow_null_intervention=args.allow_null_intervention,
            method=args.method,
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    out = output_dir(args.out)
    checkpoint = Path(args.checkpoint) if args.checkpoint else out / "grn_checkpoint.jsonl"
    if args.fresh and checkpoint.exists():
        checkpoint.unlink()

    def progress(rec):
        if args.verbose:
            print(f"k={rec.k} run={rec.run} eta_multi={rec.eta_multi:.6g}", file=sys.stderr)

    stats = cellcycle.run_experiment(config, network, checkpoint=checkpoint, progress=progress)
    config_doc = asdict(config)
    config_doc["network"] = str(args.network or cellcycle.default_network_path().name)

    runs_path = out / "grn_runs.csv"
    write_csv(runs_path, ["k", "run", "seed", "eta_multi"], [asdict(r) for r in stats.records])
    write_meta(runs_path, "grn", argv, args.seed, config_doc)

    summary_rows = [{**asdict(s), "mean_plus_std": s.mean_plus_std} for s in stats.summary]
    summary_path = out / "grn_summary.csv"
    write_csv(summary_path, ["k", "min", "median", "mean", "mean_plus_std", "runs"], summary_rows)
    write_meta(summary_path, "grn", argv, args.seed, config_doc)

    report = {
        "version": __version__,
        "config": config_doc,
        "summary": summary_rows,
        "runs": [asdict(r) for r in stats.records],
        "mocu": {
            "expectation": "enumeration",
            "integration": "trapezoid",
            "lambda_nodes": config.lambda_grid + 1,
            "solver": asdict(cellcycle.SolverConfig(method=config.method)),
            "assumptions": list(cellcycle.MODEL_ASSUMPTIONS),
        },
    }
    report_path = out / "grn_report.json"
    write_json(report_path, report)
    write_meta(report_path, "grn", argv, args.seed, config_doc)
    for s in stats.summary:
        print(f"k={s.k} runs={s.runs} min={s.min:.6g} median={s.median:.6g} mean={s.mean:.6g} mean+std={s.mean_plus_std:.6g}")
    print(f"wrote {runs_path}, {summary_path}, {report_path}")
    return EXIT_OK


def cmd_steady(args, argv) -> int:
    network = _load_network_arg(args.network)
    p = args.p
    if p is None:
        _, file_p = bnp.read_network_file(args.network or cellcycle.default_network_path())
        p = file_p if file_p is not None else cellcycle.PERTURBATION
    if args.all_edges:
        edges = list(range(len(network.edges)))
    elif args.block_edge:
        edges = [e for spec in args.block_edge for e in parse_int_list(spec)]
    else:
        edges = [None]
    config = cellcycle.SolverConfig(p=p, method=args.method, tol=args.tol, max_iter=args.max_iter)
    masks = (cellcycle.undesirable_states(network.n), cellcycle.phenotype_states(network.n))
    rows = []
    for edge in edges:
        try:
            iv = bnp.Intervention(edge)
            net = bnp.apply_intervention(network, iv)
            ss = bnp.steady_state(bnp.BnpModel(net, p), config.method, config.tol, config.max_iter)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc
        e = None if edge is None else network.edges[edge]
        rows.append(
            {
                "intervention": str(iv),
                "edge": edge,
                "source": "" if e is None else network.genes[e.source],
                "target": "" if e is None else network.genes[e.target],
                "pi_U": bnp.state_mass(ss, masks[0]),
                "pi_P": bnp.state_mass(ss, masks[1]),
                "residual": ss.residual,
                "iterations": ss.iterations,
                "method": ss.method,
            }
        )
    out = output_dir(args.out)
    columns = ["intervention", "edge", "source", "target", "pi_U", "pi_P", "residual", "iterations", "method"]
    config_doc = {**asdict(config), "network": str(args.network or cellcycle.default_network_path().name), "edges": edges}
    path = write_table(out / "steady", args.format, columns, rows, "steady", argv, None, config_doc)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mocu", description="Multi-objective mean objective cost of uncertainty.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_format=True):
        p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./mocu-results)")
        if with_format:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    q = sub.add_parser("quad", help="quadratic benchmark cases")
    q.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    q.add_argument("--c", help="curvature grid (numbers or start:stop:step)")
    q.add_argument("--d", help="center grid")
    q.add_argument("--delta", help="interval-width grid")
    q.add_argument("--samples", type=int, default=10_000, help="theta samples per grid point")
    q.add_argument("--lambda-grid", type=int, default=100, help="trapezoid intervals on [0, 1]")
    q.add_argument("--seed", type=int, default=DEFAULT_SEED)
    q.add_argument("--g-curve", action="store_true", help="also write the g(x, lambda) illustration table")
    q.add_argument("--g-lambdas", default="0:1:0.25")
    q.add_argument("--g-x", default="0:10:0.01")
    common(q)
    q.set_defaults(func=cmd_quad)

    g = sub.add_parser("grn", help="cell-cycle intervention experiment")
    g.add_argument("--network", help="network JSON (default: shipped mammalian cell cycle)")
    g.add_argument("--k", default="1-8", help="numbers of unknown edges, e.g. 1-8 or 1,2,4")
    g.add_argument("--runs", type=int, default=500)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--lambda-grid", type=int, default=100)
    g.add_argument("--method", choices=bnp.METHODS, default="reduced")
    g.add_argument("--allow-null-intervention", action="store_true")
    g.add_argument("--checkpoint", help="resumable progress file (default: <out>/grn_checkpoint.jsonl)")
    g.add_argument("--fresh", action="store_true", help="discard an existing checkpoint")
    g.add_argument("-v", "--verbose", action="store_true")
    common(g, with_format=False)
    g.set_defaults(func=cmd_grn)

    s = sub.add_parser("steady", help="steady-state masses for one network")
    s.add_argument("--network", help="network JSON (default: shipped mammalian cell cycle)")
    s.add_argument("--block-edge", action="append", help="edge index or range to block; repeatable")
    s.add_argument("--all-edges", action="store_true", help="one row per single-edge block")
    s.add_argument("--method", choices=bnp.METHODS, default="power")
    s.add_argument("--tol", type=float, default=bnp.DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=bnp.DEFAULT_MAX_ITER)
    s.add_argument("--p", type=float, help="perturbation probability (default: from the network file)")
    common(s)
    s.set_defaults(func=cmd_steady)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.func(args, argv)
    except (ConfigError, InvalidArgumentError, LoadError) as exc:
        print(f"mocu {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, EvaluationError) as exc:
        print(f"mocu {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
