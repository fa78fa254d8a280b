"""Command-line entry point for reproducible pruning experiments.

Subcommands: generate, prune, optimize, eval, montecarlo. Flags can also
come from a key=value config file; precedence is preset < file < explicit
flag. Exit codes: 0 success, 1 usage error, 2 data or solver error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from .evaluation import MetricError, map_error, relative_map_error
from .graph import GraphError
from .io_formats import (
    GraphFormatError,
    export_report,
    load_graph,
    parse_ground_truth,
    save_graph,
    serialize_ground_truth,
)
from .montecarlo import METHODS, run_monte_carlo
from .optimizer import Huber, OptimizerConfig, SolverError, chi2, optimize
from .pruning import PRESETS, PruneLog, PruningConfig, prune_edges, prune_vertices
from .synthetic import GridSpec, NoiseSpec, gen_grid, gen_random_trajectory

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


class CliError(Exception):
    pass


THRESHOLD_FLAGS = {
    "s_hat": float,
    "N_hat": int,
    "n_hat": int,
    "m_hat": int,
    "e_hat": int,
    "d_hat": float,
}


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--s-hat", dest="s_hat", type=float, default=None)
    p.add_argument("--N-hat", dest="N_hat", type=int, default=None)
    p.add_argument("--n-hat", dest="n_hat", type=int, default=None)
    p.add_argument("--m-hat", dest="m_hat", type=int, default=None)
    p.add_argument("--e-hat", dest="e_hat", type=int, default=None)
    p.add_argument("--d-hat", dest="d_hat", type=float, default=None)
    p.add_argument("--gate", dest="mahalanobis_gate", type=float, default=None)


def _read_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values

def _apply_config_file(args: argparse.Namespace) -> None:
    """File values fill in flags the user did not set explicitly."""
    if not getattr(args, "config", None):
        return
    file_values = _read_config_file(args.config)
    for key, raw in file_values.items():
        if not hasattr(args, key):
            raise CliError(f"unknown config key {key!r}")
        if getattr(args, key) is None:
            kind = THRESHOLD_FLAGS.get(key)
            if kind is None:
                current_default = _CONFIG_TYPES.get(key, str)
                kind = current_default
            setattr(args, key, kind(raw))


_CONFIG_TYPES: dict[str, type] = {
    "preset": str,
    "method": str,
    "rows": int,
    "cols": int,
    "spacing": float,
    "radius_factor": float,
    "steps": int,
    "seed": int,
    "runs": int,
    "jobs": int,
    "sigma": float,
    "huber": float,
    "max_iter": int,
    "mahalanobis_gate": float,
    "fractions": str,
    "methods": str,
    "format": str,
}


def _resolve_pruning(args) -> PruningConfig | None:
    """preset < config file < explicit flags; p_reference disables pruning."""
    preset = args.preset
    base = PRESETS[preset] if preset else PruningConfig()
    overrides = {
        name: getattr(args, name)
        for name in (*THRESHOLD_FLAGS, "mahalanobis_gate")
        if getattr(args, name, None) is not None
    }
    if preset == "p_reference":
        if overrides:
            raise CliError("p_reference performs no pruning; thresholds make no sense here")
        return None
    if base is None:
        return None
    if overrides:
        from dataclasses import replace

        return replace(base, **overrides)
    return base


def _parse_sigma_triple(text: str) -> tuple[float, float, float]:
    parts = [float(t) for t in text.split(",")]
    if len(parts) == 1:
        return (parts[0], parts[0], parts[0])
    if len(parts) != 3:
        raise CliError("sigma must be one value or x,y,theta")
    return tuple(parts)  # type: ignore[return-value]


def _noise_from_args(args) -> NoiseSpec:
    odo = (0.02, 0.02, 0.01)
    loop = (0.05, 0.05, 0.02)
    if args.sigma is not None:
        odo = loop = (args.sigma, args.sigma, args.sigma)
    if args.sigma_odo is not None:
        odo = _parse_sigma_triple(args.sigma_odo)
    if args.sigma_loop is not None:
        loop = _parse_sigma_triple(args.sigma_loop)
    return NoiseSpec(odo_sigma=odo, loop_sigma=loop, seed=args.seed if args.seed is not None else 0)


# -- subcommands ------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.kind == "grid":
        spec = GridSpec(
            rows=args.rows,
            cols=args.cols,
            spacing=args.spacing,
            radius_factor=args.radius_factor if args.radius_factor is not None else 1.5,
        )
        g, gt = gen_grid(spec)
    else:
        g, gt = gen_random_trajectory(
            steps=args.steps,
            seed=args.seed if args.seed is not None else 0,
        )
    save_graph(g, args.out)
    Path(str(args.out) + ".gt").write_text(serialize_ground_truth(gt))
    print(f"wrote {g.num_vertices()} vertices, {g.num_edges()} edges to {args.out}")
    return 0


def cmd_prune(args) -> int:
    g = load_graph(args.input)
    cfg = _resolve_pruning(args)
    nv0, ne0 = g.num_vertices(), g.num_edges()
    log = PruneLog()
    if cfg is None:
        pruned = g
    else:
        method = args.method or "sid"
        pruned, vlog = prune_vertices(g, cfg, method=method)
        pruned, elog = prune_edges(pruned, cfg)
        log.extend(vlog)
        log.extend(elog)
    save_graph(pruned, args.out)
    if args.log:
        Path(args.log).write_text(log.to_text())
    print(
        f"vertices {nv0} -> {pruned.num_vertices()}, edges {ne0} -> {pruned.num_edges()}"
        f" ({len(log.records)} actions)"
    )
    return 0


def cmd_optimize(args) -> int:
    g = load_graph(args.input)
    cfg = OptimizerConfig(
        max_iterations=args.max_iter if args.max_iter is not None else 100,
        kernel=Huber(args.huber) if args.huber is not None else None,
    )
    solved, stats = optimize(g, cfg)
    save_graph(solved, args.out)
    trace = " ".join(f"{c:.6g}" for c in stats.chi2_sequence)
    print(f"chi2 trace: {trace}")
    print(f"converged={stats.converged} iterations={stats.iterations}")
    if args.trace:
        Path(args.trace).write_text(
            "".join(f"{i} {c:.17g}\n" for i, c in enumerate(stats.chi2_sequence))
        )
    return 0


def cmd_eval(args) -> int:
    g = load_graph(args.estimate)
    ref_path = Path(args.reference)
    text = ref_path.read_text()
    reference = parse_ground_truth(text)
    me = map_error(g, reference)
    rme = relative_map_error(g, reference)
    print("TE: n/a (needs per-step estimate streams; file inputs hold final poses)")
    print(f"ME:  trans {me.trans_mean:.6f} +/- {me.trans_sd:.6f} m, "
          f"rot {me.rot_mean:.6f} +/- {me.rot_sd:.6f} deg")
    print(f"RME: trans {rme.trans_mean:.6f} +/- {rme.trans_sd:.6f} m, "
          f"rot {rme.rot_mean:.6f} +/- {rme.rot_sd:.6f} deg "
          f"(mean step distance {rme.mean_step_distance:.3f} m)")
    print(f"chi2(estimate) = {chi2(g):.6g}")
    return 0


def cmd_montecarlo(args) -> int:
    fractions = [float(t) for t in args.fractions.split(",")]
    methods = args.methods.split(",") if args.methods else list(METHODS)
    grid = GridSpec(
        rows=args.rows if args.rows is not None else 30,
        cols=args.cols if args.cols is not None else 30,
        spacing=args.spacing if args.spacing is not None else 0.3,
    )
    cfg = _resolve_pruning(args) or PruningConfig()
    opt = OptimizerConfig(
        max_iterations=args.max_iter if args.max_iter is not None else 50,
        kernel=Huber(args.huber) if args.huber is not None else Huber(1.0),
    )
    noise = _noise_from_args(args)
    t0 = time.perf_counter()
    result = run_monte_carlo(
        grid,
        noise,
        fractions,
        runs=args.runs,
        methods=methods,
        cfg=cfg,
        opt=opt,
        jobs=args.jobs if args.jobs is not None else 1,
        label=args.preset or "custom",
    )
    elapsed = time.perf_counter() - t0
    print(f"{'method':>9} {'fraction':>9} {'q25':>12} {'median':>12} {'q75':>12}")
    for cell in result.cells:
        print(
            f"{cell.method:>9} {cell.fraction:>9.3f} "
            f"{cell.q25:>12.6f} {cell.median:>12.6f} {cell.q75:>12.6f}"
        )
    print(f"total {elapsed:.1f} s for {result.runs} runs x {len(fractions)} fractions")
    if args.out:
        fmt = args.format or ("json-lines" if str(args.out).endswith(".jsonl") else "csv")
        Path(args.out).write_text(export_report(result.report, fmt))
        print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pgprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic graph + ground-truth sidecar")
    gen_sub = p_gen.add_subparsers(dest="kind", required=True)
    p_grid = gen_sub.add_parser("grid")
    p_grid.add_argument("--rows", type=int, required=True)
    p_grid.add_argument("--cols", type=int, required=True)
    p_grid.add_argument("--spacing", type=float, required=True)
    p_grid.add_argument("--radius-factor", dest="radius_factor", type=float, default=None)
    p_grid.add_argument("--out", required=True)
    p_grid.set_defaults(func=cmd_generate)
    p_rand = gen_sub.add_parser("random")
    p_rand.add_argument("--steps", type=int, required=True)
    p_rand.add_argument("--seed", type=int, default=None)
    p_rand.add_argument("--out", required=True)
    p_rand.set_defaults(func=cmd_generate)

    p_prune = sub.add_parser("prune", help="vertex pruning followed by edge pruning")
    p_prune.add_argument("input")
    p_prune.add_argument("--method", choices=["sid", "chow_liu"], default=None)
    _add_threshold_flags(p_prune)
    p_prune.add_argument("--config", default=None, help="key=value file; flags override it")
    p_prune.add_argument("--out", required=True)
    p_prune.add_argument("--log", default=None, help="write the replayable prune log here")
    p_prune.set_defaults(func=cmd_prune)

    p_opt = sub.add_parser("optimize", help="optimize a graph file")
    p_opt.add_argument("input")
    p_opt.add_argument("--out", required=True)
    p_opt.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_opt.add_argument("--huber", type=float, default=None, help="Huber delta (kernel off if absent)")
    p_opt.add_argument("--trace", default=None, help="write per-iteration chi2 here")
    p_opt.set_defaults(func=cmd_optimize)

    p_eval = sub.add_parser("eval", help="compare a graph against a reference graph or .gt sidecar")
    p_eval.add_argument("estimate")
    p_eval.add_argument("reference")
    p_eval.set_defaults(func=cmd_eval)

    p_mc = sub.add_parser("montecarlo", help="corruption sweep over seeded runs")
    p_mc.add_argument("--runs", type=int, required=True)
    p_mc.add_argument("--fractions", required=True, help="comma-separated corruption fractions")
    p_mc.add_argument("--methods", default=None, help=f"subset of {','.join(METHODS)}")
    p_mc.add_argument("--rows", type=int, default=None)
    p_mc.add_argument("--cols", type=int, default=None)
    p_mc.add_argument("--spacing", type=float, default=None)
    p_mc.add_argument("--sigma", type=float, default=None, help="one sigma for all components")
    p_mc.add_argument("--sigma-odo", dest="sigma_odo", default=None, help="x,y,theta")
    p_mc.add_argument("--sigma-loop", dest="sigma_loop", default=None, help="x,y,theta")
    p_mc.add_argument("--seed", type=int, default=None)
    p_mc.add_argument("--jobs", type=int, default=None)
    p_mc.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_mc.add_argument("--huber", type=float, default=None)
    _add_threshold_flags(p_mc)
    p_mc.add_argument("--config", default=None)
    p_mc.add_argument("--out", default=None)
    p_mc.add_argument("--format", choices=["csv", "json-lines"], default=None)
    p_mc.set_defaults(func=cmd_montecarlo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        return args.func(args)
    except (CliError, GraphError, GraphFormatError, MetricError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
