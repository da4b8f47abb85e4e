"""Command-line entry point.

Subcommands: synth, hist, compare, gradcheck, decompose-check, train.
Every subcommand accepts ``--config file.json`` whose keys set defaults for
that subcommand's flags; explicit flags win. A file written by this tool can
be passed back as ``--config`` since it embeds its effective settings.

Exit status: 0 on success, 1 on invalid input, 2 when gradcheck or
decompose-check miss their tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from . import io as dio
from .benchmark import Metric, run_comparison
from .core import BinSpec, Normalization, SampleBatch, ValidationError, make_uniform_bins
from .gradcheck import check_kernel
from .kernels import KernelKind, make_kernel, soft_histogram
from .oracle import hard_histogram, normalize, parse_boundary
from .pipeline import pipeline_equivalence_check
from .sampling import PRNG_NAME, Distribution, synth
from .train import (Generator, TrainConfig, TrainingDiverged, affine_target,
                    target_from_distribution, train)

log = logging.getLogger("diffhist")

EXIT_OK, EXIT_INVALID, EXIT_THRESHOLD = 0, 1, 2
KERNEL_NAMES = [k.value for k in KernelKind]
# settings that never belong in an embedded config; output paths are left out so
# identical runs write identical files
_NOT_CONFIG = {"func", "config", "command", "verbose", "out", "trace", "per_bin"}
# descriptive keys written next to the settings
_DERIVED = {"prng", "distribution"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_bins(p):
    p.add_argument("--lo", type=float, default=-1.0, help="lower end of the binned range")
    p.add_argument("--hi", type=float, default=1.0, help="upper end of the binned range")
    p.add_argument("--bins", type=int, default=20, help="number of equal bins")


def _add_kernel_params(p):
    p.add_argument("--base", type=float, default=1.01, help="histlayer base b > 1")
    p.add_argument("--bandwidth", type=float, default=None, help="kde bandwidth B")
    p.add_argument("--slope", type=float, default=None, help="lbf slope w (all bins)")
    p.add_argument("--gamma", type=float, default=None, help="rbf width gamma (all bins)")


def _add_source(p, required=False):
    p.add_argument("--in", dest="input", default=None, required=required,
                   help="sample file, one value per line")
    p.add_argument("--dist", choices=["normal", "uniform", "bimodal"], default="normal",
                   help="synthetic distribution used when --in is absent")
    p.add_argument("--n", type=int, default=10_000, help="synthetic sample count")
    p.add_argument("--seed", type=int, default=42)


def build_parser() -> Parser:
    parser = Parser(prog="diffhist", description="Differentiable histograms with hard binning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=Parser, required=True)

    p = sub.add_parser("synth", help="write seeded synthetic samples")
    p.add_argument("--dist", choices=["normal", "uniform", "bimodal"], default="normal")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--std", type=float, default=1.0)
    p.add_argument("--lo", type=float, default=-1.0, help="uniform lower bound")
    p.add_argument("--hi", type=float, default=1.0, help="uniform upper bound")
    p.add_argument("--mean2", type=float, default=1.0, help="bimodal second mean")
    p.add_argument("--std2", type=float, default=1.0, help="bimodal second std")
    p.add_argument("--mix", type=float, default=0.5, help="bimodal first-component weight")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("hist", help="histogram a sample file with one kernel")
    p.add_argument("--in", dest="input", required=True)
    _add_bins(p)
    p.add_argument("--kernel", choices=KERNEL_NAMES + ["hard"], default="histlayer")
    _add_kernel_params(p)
    p.add_argument("--normalize", choices=["counts", "probability"], default="counts")
    p.add_argument("--boundary", choices=["open", "right_open"], default="right_open",
                   help="edge convention of the hard kernel")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("compare", help="error of every soft histogram against the oracle")
    _add_source(p)
    _add_bins(p)
    _add_kernel_params(p)
    p.add_argument("--kernels", nargs="+", choices=KERNEL_NAMES, default=KERNEL_NAMES)
    p.add_argument("--metric", choices=[m.value for m in Metric], default="sum_abs")
    p.add_argument("--boundary", choices=["open", "right_open"], default="right_open")
    p.add_argument("--normalize", choices=["counts", "probability"], default="probability")
    p.add_argument("--out", default=None)
    p.add_argument("--per-bin", dest="per_bin", default=None, help="per-bin CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic derivatives")
    p.add_argument("--kernel", choices=KERNEL_NAMES + ["all"], default="all")
    _add_bins(p)
    _add_kernel_params(p)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--exclusion", type=float, default=1e-4)
    p.add_argument("--x-lo", dest="x_lo", type=float, default=-1.2)
    p.add_argument("--x-hi", dest="x_hi", type=float, default=1.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("decompose-check", help="staged pipeline vs direct histlayer formula")
    _add_source(p)
    _add_bins(p)
    p.add_argument("--base", type=float, default=1.01)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="fit a generator to a target histogram")
    p.add_argument("--target-dist", dest="target_dist",
                   choices=["affine", "normal", "uniform", "bimodal"], default="affine")
    p.add_argument("--target-file", dest="target_file", default=None,
                   help="probability histogram JSON used as the target")
    p.add_argument("--target-n", dest="target_n", type=int, default=100_000)
    p.add_argument("--target-seed", dest="target_seed", type=int, default=12345)
    p.add_argument("--target-scale", dest="target_scale", type=float, default=0.5)
    p.add_argument("--target-offset", dest="target_offset", type=float, default=0.2)
    p.add_argument("--target-mean", dest="target_mean", type=float, default=-0.4)
    p.add_argument("--target-std", dest="target_std", type=float, default=0.15)
    p.add_argument("--target-mean2", dest="target_mean2", type=float, default=0.4)
    p.add_argument("--target-std2", dest="target_std2", type=float, default=0.15)
    p.add_argument("--target-mix", dest="target_mix", type=float, default=0.5)
    p.add_argument("--target-lo", dest="target_lo", type=float, default=-0.3)
    p.add_argument("--target-hi", dest="target_hi", type=float, default=0.7)
    p.add_argument("--generator", choices=["affine", "mlp"], default="affine")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--init-a", dest="init_a", type=float, default=1.0)
    p.add_argument("--init-b", dest="init_b", type=float, default=0.0)
    _add_bins(p)
    p.add_argument("--kernel", choices=KERNEL_NAMES, default="kde")
    _add_kernel_params(p)
    p.add_argument("--loss", choices=["l1", "l2"], default="l2")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--adam-eps", dest="adam_eps", type=float, default=1e-8)
    p.add_argument("--noise", choices=["uniform", "normal"], default="uniform")
    p.add_argument("--noise-n", dest="noise_n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--trace", default=None, help="CSV of step, loss, grad_norm")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    for name, subparser in sub.choices.items():
        subparser.add_argument("--config", default=None,
                               help="JSON file of defaults for this subcommand's flags")
    parser.subcommands = sub.choices
    return parser


def _load_config(path: str, command: str, subparser: Parser) -> dict:
    doc = dio.read_config_document(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    # accept an output file and use its embedded settings
    embedded = doc.get("config")
    if isinstance(embedded, dict) and isinstance(embedded.get("run"), dict):
        embedded = embedded["run"]
    if isinstance(embedded, dict) and "command" in embedded:
        doc = embedded
    if doc.get("command", command) != command:
        raise ValidationError(f"{path}: config is for '{doc['command']}', not '{command}'")
    known = {a.dest for a in subparser._actions}
    settings = {k: v for k, v in doc.items() if k not in _NOT_CONFIG | _DERIVED}
    unknown = sorted(set(settings) - known)
    if unknown:
        raise ValidationError(f"{path}: unknown setting(s) {', '.join(unknown)}")
    return settings


def parse_args(argv: List[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        subparser = parser.subcommands[args.command]
        subparser.set_defaults(**_load_config(args.config, args.command, subparser))
        args = parser.parse_args(argv)
    return args


def effective_config(args: argparse.Namespace) -> dict:
    d = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
    d["command"] = args.command
    return d


def _bins(args) -> BinSpec:
    return make_uniform_bins(args.lo, args.hi, args.bins)


def _kernel(name, args, bins):
    return make_kernel(name, bins, base=args.base, slope=args.slope, gamma=args.gamma,
                       bandwidth=args.bandwidth)


def _samples(args) -> SampleBatch:
    if args.input:
        return dio.read_samples(args.input)
    return synth(Distribution(args.dist), args.n, args.seed)


def _emit(doc: dict, path: Optional[str]) -> None:
    if path:
        dio.write_json(doc, path)


def cmd_synth(args) -> int:
    dist = Distribution(args.dist, mean=args.mean, std=args.std, lo=args.lo, hi=args.hi,
                        mean2=args.mean2, std2=args.std2, mix=args.mix)
    batch = synth(dist, args.n, args.seed)
    header = {**effective_config(args), "prng": PRNG_NAME, "distribution": dist.describe()}
    if args.out:
        dio.write_samples(batch, args.out, header)
    else:
        sys.stdout.write("# " + json.dumps(header, sort_keys=True) + "\n")
        sys.stdout.writelines(repr(v) + "\n" for v in batch.values.tolist())
    return EXIT_OK


def cmd_hist(args) -> int:
    bins = _bins(args)
    samples = dio.read_samples(args.input)
    if args.kernel == "hard":
        h = normalize(hard_histogram(samples, bins, parse_boundary(args.boundary)), args.normalize)
        kernel_doc = "hard"
    else:
        kernel = _kernel(args.kernel, args, bins)
        h = soft_histogram(samples, bins, kernel, args.normalize)
        kernel_doc = kernel.kind.value
    doc = dio.histogram_document(h, bins, kernel_doc, effective_config(args))
    if args.out:
        dio.write_json(doc, args.out)
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    bins = _bins(args)
    samples = _samples(args)
    kernels = [_kernel(k, args, bins) for k in args.kernels]
    report = run_comparison(samples, bins, kernels, parse_boundary(args.boundary),
                            Normalization(args.normalize), Metric(args.metric),
                            source={"input": args.input, "dist": None if args.input else args.dist,
                                    "n": len(samples), "seed": None if args.input else args.seed,
                                    "prng": None if args.input else PRNG_NAME})
    report.config["run"] = effective_config(args)
    sys.stdout.write(report.to_text())
    if args.out:
        dio.write_report(report, args.out)
    if args.per_bin:
        dio.write_per_bin_csv(report, args.per_bin)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    bins = _bins(args)
    names = KERNEL_NAMES if args.kernel == "all" else [args.kernel]
    reports, ok = [], True
    for name in names:
        r = check_kernel(_kernel(name, args, bins), bins, n_points=args.points, lo=args.x_lo,
                         hi=args.x_hi, seed=args.seed, eps=args.eps,
                         exclusion_radius=args.exclusion)
        passed = r.passed(args.tol)
        ok &= passed
        reports.append({**r.to_dict(), "passed": passed})
        print(f"{'PASS' if passed else 'FAIL'} {name:<9} points={r.n_points} "
              f"excluded={r.excluded_points} max_rel_error={r.max_rel_error:.3e} "
              f"({r.worst_coordinate})")
    _emit({"config": effective_config(args), "reports": reports}, args.out)
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_decompose(args) -> int:
    bins = _bins(args)
    samples = _samples(args)
    gap = pipeline_equivalence_check(samples, bins, args.base)
    passed = gap <= args.tol
    print(f"{'PASS' if passed else 'FAIL'} max discrepancy {gap:.3e} over {len(samples)} samples "
          f"(tolerance {args.tol:g}){' exact' if gap == 0 else ''}")
    _emit({"config": effective_config(args), "discrepancy": gap, "exact": gap == 0.0,
           "passed": passed}, args.out)
    return EXIT_OK if passed else EXIT_THRESHOLD


def _target(args, bins):
    if args.target_file:
        h, target_bins, _ = dio.read_histogram(args.target_file)
        if target_bins != bins:
            raise ValidationError("target histogram bins differ from --lo/--hi/--bins")
        return normalize(h, Normalization.PROBABILITY)
    if args.target_dist == "affine":
        return affine_target(bins, args.target_scale, args.target_offset, args.target_n,
                             args.target_seed)
    dist = Distribution(args.target_dist, mean=args.target_mean, std=args.target_std,
                        lo=args.target_lo, hi=args.target_hi, mean2=args.target_mean2,
                        std2=args.target_std2, mix=args.target_mix)
    return target_from_distribution(dist, bins, args.target_n, args.target_seed)


def cmd_train(args) -> int:
    bins = _bins(args)
    if args.generator == "affine":
        g0 = Generator.affine(args.init_a, args.init_b)
    else:
        g0 = Generator.mlp(args.hidden, seed=args.seed)
    config = TrainConfig(
        target=_target(args, bins), bins=bins, kernel=_kernel(args.kernel, args, bins),
        loss=args.loss, noise=args.noise, noise_n=args.noise_n, seed=args.seed,
        optimizer=args.optimizer, lr=args.lr, steps=args.steps, beta1=args.beta1,
        beta2=args.beta2, adam_eps=args.adam_eps)
    trace = train(config, g0)
    if args.trace:
        dio.write_trace_csv(trace, args.trace)
    first, last = trace.losses[0], trace.losses[-1]
    print(f"loss {first:.6g} -> {last:.6g} over {args.steps} steps; "
          f"final params {json.dumps(trace.final_params['params'])}")
    _emit({"config": effective_config(args), "train_config": config.describe(),
           "prng": PRNG_NAME, **trace.to_dict()}, args.out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_INVALID
    except ValidationError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, TrainingDiverged, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
