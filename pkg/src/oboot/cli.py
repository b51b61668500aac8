"""``oboot`` command line: train, predict, benchmark, convergence, gen, dump."""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from . import driver, model_io, synth
from .bootstrap import Aggregate
from .distributions import WeightMode
from .learner import DivergenceError, LossKind
from .model_io import ModelFormatError
from .parser import MAX_BITS, ParseError


def _bits(s: str) -> int:
    b = int(s)
    if not 1 <= b <= MAX_BITS:
        raise argparse.ArgumentTypeError(f"bits must be in [1, {MAX_BITS}]")
    return b


def _positive_int(s: str) -> int:
    n = int(s)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _int_list(s: str) -> list[int]:
    try:
        out = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("bootstrap counts must be >= 1")
    return out


def _add_model_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    p.add_argument("--bits", type=_bits, default=18 if defaults else None,
                   help="log2 of the feature table size (default 18)")
    p.add_argument("--bootstrap", type=_positive_int, default=1 if defaults else None,
                   metavar="N", help="number of bootstrapped submodels")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in WeightMode], default="scaled",
                   help="importance resampling: scaled = W*Poisson(1), direct = Poisson(W)")
    p.add_argument("--aggregate", choices=[a.value for a in Aggregate], default="mean")
    p.add_argument("--loss", choices=[k.value for k in LossKind], default="squared")
    p.add_argument("--eta0", type=float, default=0.5, help="initial learning rate")
    p.add_argument("--power-t", type=float, default=0.5, help="learning rate decay exponent")
    p.add_argument("--holdout-period", type=int, default=10,
                   help="hold out every k-th example of each pass; 0 disables")
    p.add_argument("--interval-level", type=float, default=0.1,
                   help="alpha of the (alpha/2, 1-alpha/2) percentile interval")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-bad-lines", action="store_true",
                   help="count and skip malformed lines instead of aborting")
    p.add_argument("--pipeline", action="store_true",
                   help="parse on a separate thread feeding a bounded queue")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oboot", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a (bootstrapped) model")
    p.add_argument("input", nargs="?", default="-", help="example file, '-' for stdin")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--passes", type=_positive_int, default=1)
    p.add_argument("--final-model", "-f", help="where to write the model file")
    p.add_argument("--quiet", action="store_true", help="no per-pass progress on stderr")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--model", "-i", required=True)
    p.add_argument("--predictions", "-p", help="output CSV (default stdout)")
    _add_model_flags(p, defaults=False)
    _add_run_flags(p)

    p = sub.add_parser("benchmark", help="online bootstrap time vs N x single-model time")
    p.add_argument("input")
    p.add_argument("--n-values", type=_int_list, default=[1, 2, 4, 8, 16, 20])
    p.add_argument("--bits", type=_bits, default=18)
    _add_run_flags(p)
    p.add_argument("--warmup-lines", type=int, default=1000)
    p.add_argument("--repeats", type=_positive_int, default=1)
    p.add_argument("--output", "-o", help="CSV path (default stdout)")

    p = sub.add_parser("convergence", help="TV distance of Binom(n,1/n) from Poisson(1)")
    p.add_argument("--max-n", type=int, default=1024)
    p.add_argument("--output", "-o")

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("output", nargs="?", default="-")
    p.add_argument("--examples", type=_positive_int, default=1000)
    p.add_argument("--features", type=_positive_int, default=10000, help="vocabulary size")
    p.add_argument("--per-example", type=_positive_int, default=20)
    p.add_argument("--sparsity", type=float, default=0.1,
                   help="fraction of vocabulary with nonzero true weight")
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--task", choices=["binary", "regression"], default="binary")
    p.add_argument("--quadratic", type=int, default=0, help="dense features with pair products")
    p.add_argument("--binary-values", action="store_true", help="omit feature values")
    p.add_argument("--normalize", action="store_true",
                   help="scale values by 1/sqrt(per-example) for unit expected norm")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("dump", help="print a model file as text")
    p.add_argument("model")
    return ap


def _run_config(args, **extra) -> driver.RunConfig:
    return driver.RunConfig(
        input=getattr(args, "input", None),
        seed=args.seed,
        bits=args.bits if args.bits is not None else 18,
        n_models=getattr(args, "bootstrap", None) or 1,
        mode=WeightMode(args.mode),
        aggregate=Aggregate(args.aggregate),
        loss=LossKind(args.loss),
        eta0=args.eta0,
        power_t=args.power_t,
        holdout_period=args.holdout_period,
        interval_level=args.interval_level,
        skip_bad_lines=args.skip_bad_lines,
        pipeline=args.pipeline,
        **extra,
    )


@contextlib.contextmanager
def _output(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as f:
            yield f


def _report(metrics, label: str) -> None:
    loss = "n/a" if metrics.mean_loss is None else f"{metrics.mean_loss:.6f}"
    err = "n/a" if metrics.error_rate is None else f"{metrics.error_rate:.6f}"
    print(f"{label}: examples={metrics.example_count} loss={loss} error_rate={err}",
          file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return _dispatch(args)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except (ParseError, ModelFormatError, DivergenceError, ValueError, OSError) as err:
        print(f"oboot: error: {err}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "train":
        cfg = _run_config(args, passes=args.passes, final_model=args.final_model)
        result = driver.run_train(cfg, progress=None if args.quiet else sys.stderr)
        _report(result.metrics, "holdout" if result.best_pass else "progressive")
        return 0

    if cmd == "predict":
        model = model_io.load(args.model)
        cfg = _run_config(args)
        with _output(args.predictions) as out:
            res = driver.run_predict(cfg, model, out, bits=args.bits, n_models=args.bootstrap)
        if res.metrics.example_count:
            _report(res.metrics, "test")
        return 0

    if cmd == "benchmark":
        cfg = _run_config(args)
        rows = driver.run_benchmark(cfg, args.n_values, args.warmup_lines, args.repeats)
        with _output(args.output) as out:
            driver.write_benchmark_csv(rows, out)
        return 0

    if cmd == "convergence":
        with _output(args.output) as out:
            driver.write_convergence_csv(driver.run_convergence(args.max_n), out)
        return 0

    if cmd == "gen":
        sc = synth.SynthConfig(
            n_examples=args.examples, n_features=args.features, per_example=args.per_example,
            sparsity=args.sparsity, noise=args.noise, task=args.task,
            quadratic=args.quadratic, binary_values=args.binary_values,
            normalize=args.normalize, seed=args.seed,
        )
        with _output(args.output) as out:
            synth.write(sc, out)
        return 0

    if cmd == "dump":
        model_io.dump_text(model_io.load(args.model), sys.stdout)
        return 0
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
