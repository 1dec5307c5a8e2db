"""Command-line interface: ``gnbp <subcommand> [flags]``.

Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import _backend
from .dist import ModelParams, Parameterization, gnb_log_pmf, tnb_log_pmf
from .gibbs import ChainConfig, Variant, predictive_density, run_chain, run_prior_chain
from .io import (
    FIGURE_KINDS,
    DatasetError,
    export_figure_data,
    galaxy_path,
    load_config,
    load_dataset,
    read_trace,
    summarize,
    write_trace,
)
from .process import cluster_number_pmf, simulate_prior_batch, solve_prob
from .special import build_stirling, check_discount

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- helpers


def _real(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def _real_or_learn(text: str):
    return "learn" if text.lower() == "learn" else _real(text)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text) if text.lstrip("-").isdigit() else None
    if v is None or v < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer: {text!r}")
    return v


def _parameterization(variant: str) -> Parameterization:
    return Variant(variant).parameterization


def _model_params(args, require_prob: bool = True) -> ModelParams:
    """Build parameters from ``--mass --a`` and ``--p`` or ``--expected-m``."""
    try:
        check_discount(args.a)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    par = _parameterization(args.variant)
    if args.p is not None and args.expected_m is not None:
        raise UsageError("give either --p or --expected-m, not both")
    if args.p is None and args.expected_m is None:
        if require_prob:
            raise UsageError("one of --p or --expected-m is required")
        return ModelParams(args.mass, args.a, 0.5, par)
    if args.mass <= 0:
        raise UsageError("--mass must be positive")
    if args.expected_m is not None:
        if args.expected_m <= 0:
            raise UsageError("--expected-m must be positive")
        p = solve_prob(args.expected_m, args.mass, args.a, par)
    else:
        if not 0.0 < args.p < 1.0:
            raise UsageError("--p must lie in (0, 1)")
        p = args.p
    return ModelParams(args.mass, args.a, p, par)


def _preamble(command: str, **items) -> str:
    body = " ".join(f"{k}={v}" for k, v in items.items())
    return f"# gnbp {command} {body}".rstrip()


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _chain_path(path: Path, index: int, chains: int) -> Path:
    if chains == 1:
        return path
    return path.with_name(f"{path.stem}.chain{index}{path.suffix}")


# ------------------------------------------------------------- subcommands


def cmd_simulate_prior(args) -> int:
    params = _model_params(args)
    if args.n_draws < 1:
        raise UsageError("--n-draws must be >= 1")
    rng = np.random.default_rng(args.seed)
    ls, ms, sizes = simulate_prior_batch(params, args.n_draws, rng)
    offsets = np.concatenate([[0], np.cumsum(ls)])
    fh, close = _open_out(args.out)
    try:
        fh.write(_preamble("simulate-prior", seed=args.seed, mass=params.mass, a=params.discount,
                           p=repr(params.prob), variant=args.variant) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["draw", "l", "m", "sizes"])
        for i in range(args.n_draws):
            block = sizes[offsets[i]:offsets[i + 1]]
            writer.writerow([i, int(ls[i]), int(ms[i]), " ".join(str(int(v)) for v in block)])
    finally:
        if close:
            fh.close()
    report = sys.stdout if close else sys.stderr
    print(f"mean l = {ls.mean():.6g}", file=report)
    print(f"mean m = {ms.mean():.6g}", file=report)
    return EXIT_OK


def cmd_pmf(args) -> int:
    params = _model_params(args)
    if args.m < 1:
        raise UsageError("--m must be >= 1")
    a, p = params.discount, params.prob
    fh, close = _open_out(args.out)
    try:
        fh.write(_preamble("pmf", kind=args.kind, seed=args.seed) + "\n")
        writer = csv.writer(fh)
        extra = [params.mass, a, repr(p), args.variant]
        if args.kind == "cluster-number":
            pmf = cluster_number_pmf(args.m, params, build_stirling(args.m, a))
            writer.writerow(["l", "probability", "mass", "a", "p", "variant"])
            for l in range(1, args.m + 1):
                writer.writerow([l, repr(float(pmf[l])), *extra])
        elif args.kind == "tnb":
            writer.writerow(["n_k", "probability", "mass", "a", "p", "variant"])
            probs = np.exp(tnb_log_pmf(np.arange(1, args.m + 1), a, p))
            for n, v in enumerate(probs, start=1):
                writer.writerow([n, repr(float(v)), *extra])
        else:
            writer.writerow(["m", "probability", "mass", "a", "p", "variant"])
            tri = build_stirling(args.m, a)
            for m in range(args.m + 1):
                writer.writerow([m, repr(math.exp(gnb_log_pmf(m, params, tri))), *extra])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _resolve_data(path_text: str) -> Path:
    path = Path(path_text)
    if path_text == "galaxy" or (not path.exists() and path.name == "galaxy.csv"):
        return galaxy_path()
    if not path.exists():
        raise UsageError(f"data file not found: {path_text}")
    return path


def _fit_config(args) -> ChainConfig:
    base = load_config(args.config).to_dict() if args.config else {}
    if args.a is not None:
        base["learn_discount"] = args.a == "learn"
        if args.a != "learn":
            base["discount"] = args.a
    elif not args.config:
        base["learn_discount"] = True
    if args.p is not None:
        base["learn_prob"] = args.p == "learn"
        if args.p != "learn":
            base["prob"] = args.p
    for key in ("iterations", "burn_in", "grid_points", "seed", "mass", "variant", "init",
                "subsample_j"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.fix_mass:
        base["learn_mass"] = False
    if args.record_assignments:
        base["record_assignments"] = True
    base.setdefault("seed", 0)
    try:
        return ChainConfig(**base)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _fit_one(data: np.ndarray, config: ChainConfig):
    return run_chain(data, config)


def _density_grid(points: np.ndarray, n: int = 400) -> np.ndarray:
    lo, hi = points.min(), points.max()
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    return np.linspace(lo - pad, hi + pad, n)


def cmd_fit(args) -> int:
    config = _fit_config(args)
    try:
        data = load_dataset(_resolve_data(args.data))
    except (DatasetError, OSError) as exc:
        raise UsageError(str(exc)) from None
    if args.chains < 1:
        raise UsageError("--chains must be >= 1")
    if config.subsample_j is not None and config.subsample_j > data.m:
        raise UsageError("--subsample-j exceeds the number of data points")
    configs = [ChainConfig(**{**config.to_dict(), "seed": config.seed + i}) for i in range(args.chains)]
    print(_preamble("fit", seed=config.seed, chains=args.chains, variant=config.variant.value,
                    data=args.data, backend=_backend.BACKEND))
    if args.chains == 1:
        traces = [_fit_one(data.points, configs[0])]
    else:
        with ProcessPoolExecutor() as pool:
            traces = list(pool.map(_fit_one, [data.points] * args.chains, configs))
    out = Path(args.out)
    for i, trace in enumerate(traces):
        trace_path = _chain_path(out, i, args.chains)
        write_trace(trace, trace_path)
        summary = summarize(trace).to_dict()
        summary["seed"] = configs[i].seed
        if data.dim == 1:
            grid = _density_grid(data.points[:, 0])
            summary["predictive_density"] = {
                "x": grid.tolist(), "density": predictive_density(trace, grid).tolist()}
        summary_path = trace_path.with_name(trace_path.name + ".summary.json")
        summary_path.write_text(json.dumps(summary, indent=1))
        print(f"chain {i} seed={configs[i].seed} records={len(trace)} "
              f"mean_l={summary['posterior_mean_l']:.4f} "
              f"unit_ratio={summary['unit_size_ratio']:.4f} "
              f"mean_a={summary['posterior_mean_a']:.4f} trace={trace_path}")
    return EXIT_OK


def cmd_prior_partitions(args) -> int:
    params = _model_params(args)
    if not 1 <= args.j <= args.m:
        raise UsageError("need 1 <= --j <= --m")
    if args.burn_in >= args.iterations:
        raise UsageError("--burn-in must be smaller than --iterations")
    trace = run_prior_chain(args.m, params, args.iterations, args.burn_in, args.seed, j=args.j)
    values, counts = np.unique(trace.column("l_sub"), return_counts=True)
    fh, close = _open_out(args.out)
    try:
        fh.write(_preamble("prior-partitions", seed=args.seed, m=args.m, j=args.j, mass=params.mass,
                           a=params.discount, p=repr(params.prob), variant=args.variant) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["l_sub", "probability"])
        for v, c in zip(values, counts):
            writer.writerow([int(v), repr(float(c / counts.sum()))])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_summarize(args) -> int:
    try:
        trace = read_trace(args.trace)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read trace: {exc}") from None
    summary = summarize(trace).to_dict()
    text = json.dumps(summary, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


FIG4_DISCOUNTS = (-4.0, -1.0, 0.0, 0.5, 0.9)
FIG5_DISCOUNTS = (-4.0, -2.0, -0.5, 0.0, 0.25, 0.5, 0.9, 0.99)
FIG6_DISCOUNTS = (-4.0, 0.0, 0.9)
_FIG_VARIANTS = (Variant.GNBP, Variant.REPARAM)


def _galaxy_chain(cache, data, variant, a, args):
    key = (variant, a)
    if key not in cache:
        learn = a == "learn"
        cfg = ChainConfig(iterations=args.iterations, burn_in=args.burn_in, seed=args.seed,
                          grid_points=args.grid_points, variant=variant,
                          discount=0.0 if learn else a, learn_discount=learn)
        cache[key] = run_chain(data, cfg)
    return cache[key]


def cmd_export_figures(args) -> int:
    kinds = FIGURE_KINDS if args.which == "all" else (args.which,)
    if args.burn_in >= args.iterations:
        raise UsageError("--burn-in must be smaller than --iterations")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(_preamble("export-figures", seed=args.seed, which=args.which,
                    iterations=args.iterations, burn_in=args.burn_in))
    cache: dict = {}
    data = None
    for kind in kinds:
        path = out_dir / f"{kind}.{args.format}"
        if kind in ("fig2", "fig3"):
            export_figure_data(kind, path, fmt=args.format)
        elif kind == "fig4":
            rows = []
            for variant in _FIG_VARIANTS:
                for a in FIG4_DISCOUNTS:
                    params = ModelParams(1.0, a, 0.9, variant.parameterization)
                    for m in (20, 100):
                        tr = run_prior_chain(m, params, args.iterations, args.burn_in, args.seed, j=20)
                        rows.append({"variant": variant, "a": a, "m": m, "j": 20,
                                     "l_sub": tr.column("l_sub")})
            export_figure_data(kind, path, rows, fmt=args.format)
        else:
            if data is None:
                data = load_dataset(_resolve_data(args.data)).points
            discounts = FIG5_DISCOUNTS if kind == "fig5" else FIG6_DISCOUNTS
            items = []
            for variant in _FIG_VARIANTS:
                for a in (*discounts, "learn"):
                    trace = _galaxy_chain(cache, data, variant, a, args)
                    item = {"variant": variant, "a": a, "learned": a == "learn",
                            "summary": summarize(trace)}
                    if kind == "fig6":
                        item["non_unit"] = [r.non_unit_count for r in trace.records]
                        if data.shape[1] == 1:
                            grid = _density_grid(data[:, 0])
                            item["grid"], item["density"] = grid, predictive_density(trace, grid)
                    items.append(item)
            export_figure_data(kind, path, items, fmt=args.format)
        print(f"wrote {path}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_param_flags(p: argparse.ArgumentParser, variants=("gnbp", "reparam")) -> None:
    p.add_argument("--mass", type=_real, default=1.0, help="gamma_0, or h_0 when reparameterized (default 1)")
    p.add_argument("--a", type=_real, default=0.0, help="discount parameter, a < 1 (default 0)")
    p.add_argument("--p", type=_real, default=None, help="probability parameter in (0, 1)")
    p.add_argument("--expected-m", type=_real, default=None, help="solve p from a target E[m]")
    p.add_argument("--variant", choices=variants, default="gnbp", help="parameterization (default gnbp)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", default=None, help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnbp", description="Generalized negative binomial process tools.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("simulate-prior", help="draw cluster structures from the prior")
    _add_param_flags(p)
    p.add_argument("--n-draws", type=_positive_int, default=1000, help="number of draws (default 1000)")
    p.set_defaults(func=cmd_simulate_prior)

    p = sub.add_parser("pmf", help="tabulate cluster-number, cluster-size or sample-size PMFs")
    _add_param_flags(p)
    p.add_argument("--kind", choices=("cluster-number", "tnb", "gnb"), default="cluster-number")
    p.add_argument("--m", type=_positive_int, required=True,
                   help="sample size for cluster-number; largest value tabulated otherwise")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("fit", help="run the Gaussian count-mixture sampler")
    p.add_argument("--data", required=True, help="CSV dataset, or 'galaxy' for the bundled data")
    p.add_argument("--variant", choices=[v.value for v in Variant], default=None)
    p.add_argument("--a", type=_real_or_learn, default=None, help="fixed discount or 'learn' (default learn)")
    p.add_argument("--p", type=_real_or_learn, default=None, help="fixed probability or 'learn' (default learn)")
    p.add_argument("--mass", type=_real, default=None, help="initial (or fixed) mass")
    p.add_argument("--fix-mass", action="store_true", help="keep the mass fixed")
    p.add_argument("--iterations", type=_positive_int, default=None, help="default 15000")
    p.add_argument("--burn-in", type=_nonneg_int, default=None, help="default 5000")
    p.add_argument("--grid-points", type=_positive_int, default=None, help="griddy-Gibbs grid size (default 9999)")
    p.add_argument("--init", choices=("random", "one", "singletons"), default=None)
    p.add_argument("--subsample-j", type=_positive_int, default=None,
                   help="also record the number of clusters among the first j points")
    p.add_argument("--record-assignments", action="store_true")
    p.add_argument("--config", default=None, help="key = value file with chain settings")
    p.add_argument("--chains", type=_positive_int, default=1, help="independent chains, seeds seed+i")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--out", default="trace.jsonl", help="trace path, .jsonl or .csv (default trace.jsonl)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prior-partitions", help="prediction-rule Gibbs chain without data")
    _add_param_flags(p)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--j", type=_positive_int, default=20, help="sub-sample size (default 20)")
    p.add_argument("--iterations", type=_positive_int, default=15000)
    p.add_argument("--burn-in", type=_nonneg_int, default=5000)
    p.set_defaults(func=cmd_prior_partitions)

    p = sub.add_parser("summarize", help="posterior summaries of a saved trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("export-figures", help="write figure data tables")
    p.add_argument("--which", choices=(*FIGURE_KINDS, "all"), default="all")
    p.add_argument("--out-dir", default="figures")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--data", default="galaxy")
    p.add_argument("--iterations", type=_positive_int, default=15000)
    p.add_argument("--burn-in", type=_nonneg_int, default=5000)
    p.add_argument("--grid-points", type=_positive_int, default=9999)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DatasetError) as exc:
        print(f"gnbp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"gnbp {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
