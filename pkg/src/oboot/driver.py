"""Streaming train / predict / benchmark runs behind the command line."""
from __future__ import annotations

import contextlib
import os
import queue
import sys
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, TextIO

from . import bootstrap, model_io
from .bootstrap import Aggregate, BootstrapConfig
from .distributions import RngState, WeightMode, binom_poisson_tv_distance
from .evaluation import (
    HoldoutTracker,
    Metrics,
    _Accumulator,
    end_of_pass,
    is_holdout,
    record,
    sign,
)
from .learner import LearnerConfig, LossKind, WeightTable, loss_value
from .model_io import ModelFile
from .parser import Example, Parser, ParserConfig


QUEUE_SIZE = 256


@dataclass
class RunConfig:
    input: str | None = None  # None or "-" reads stdin
    passes: int = 1
    seed: int = 0
    bits: int = 18
    n_models: int = 1
    mode: WeightMode = WeightMode.SCALED
    aggregate: Aggregate = Aggregate.MEAN
    loss: LossKind = LossKind.SQUARED
    eta0: float = 0.5
    power_t: float = 0.5
    holdout_period: int = 10  # 0 disables holdout
    interval_level: float = 0.1
    final_model: str | None = None
    predictions: str | None = None
    skip_bad_lines: bool = False
    pipeline: bool = False

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError(f"passes must be >= 1, got {self.passes}")
        if self.holdout_period == 1 or self.holdout_period < 0:
            raise ValueError(f"holdout period must be 0 (off) or >= 2, got {self.holdout_period}")

    @property
    def parser_config(self) -> ParserConfig:
        return ParserConfig(self.bits)

    @property
    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(self.loss, self.eta0, self.power_t)

    @property
    def bootstrap_config(self) -> BootstrapConfig:
        return BootstrapConfig(self.n_models, self.mode, self.aggregate, self.interval_level)


@dataclass
class TrainResult:
    model: ModelFile
    metrics: Metrics
    tracker: HoldoutTracker | None
    best_pass: int | None
    lines_parsed: int
    examples_trained: int
    holdout_ordinals: list[list[int]] = field(default_factory=list)
    last_table: WeightTable | None = None  # weights after the final pass, before selection


# --------------------------------------------------------------------------
# input


@contextlib.contextmanager
def _open_input(path: str | None):
    if path in (None, "-"):
        yield sys.stdin.buffer
    else:
        with open(path, "rb") as f:
            yield f


def _pipelined(source: Iterator[Example]) -> Iterator[Example]:
    """Run ``source`` on a worker thread, handing items over a bounded queue."""
    q: queue.Queue = queue.Queue(maxsize=QUEUE_SIZE)
    done = object()
    stop = threading.Event()

    def work():
        try:
            for item in source:
                if stop.is_set():
                    return
                q.put(item)
            q.put(done)
        except BaseException as err:  # re-raised on the consumer side
            q.put(err)

    worker = threading.Thread(target=work, name="oboot-parser", daemon=True)
    worker.start()
    try:
        while True:
            item = q.get()
            if item is done:
                return
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop.set()
        while worker.is_alive():
            try:
                q.get_nowait()
            except queue.Empty:
                worker.join(0.01)


def iter_examples(lines: Iterable[bytes], parser: Parser, pipeline: bool = False) -> Iterator[Example]:
    source = parser.iter_lines(lines)
    return _pipelined(source) if pipeline else source


# --------------------------------------------------------------------------
# training


def run_train(
    config: RunConfig,
    sampler: bootstrap.Sampler | None = None,
    progress: TextIO | None = None,
) -> TrainResult:
    """Stream the input through the parser and the bootstrap trainer.

    Every ``holdout_period``-th example of each pass is held out: it is
    neither trained on nor used for a Z draw.  Held-out examples are scored
    with the model as it stands at the end of the pass, so the saved best
    model reproduces the reported holdout loss exactly.
    """
    if config.passes > 1 and config.input in (None, "-"):
        raise ValueError("multiple passes need a seekable input file")
    bcfg = config.bootstrap_config
    lcfg = config.learner_config
    table = WeightTable(config.bits, config.n_models)
    rng = RngState(config.seed)
    parser = Parser(config.parser_config, config.skip_bad_lines)
    period = config.holdout_period
    tracker = HoldoutTracker(period, config.loss) if period else None
    train_acc = _Accumulator()
    best_weights = None
    best_pass = None
    trained = 0
    holdout_ordinals = []

    if progress is not None:
        progress.write("pass,examples,train_loss,holdout_loss\n")

    for pass_no in range(1, config.passes + 1):
        held: list[Example] = []
        ordinals: list[int] = []
        train_acc = _Accumulator()
        n_seen = 0
        with _open_input(config.input) as f:
            for ordinal, ex in enumerate(iter_examples(f, parser, config.pipeline)):
                n_seen += 1
                if tracker is not None and is_holdout(ordinal, period):
                    ordinals.append(ordinal)
                    if ex.label is not None:
                        held.append(ex)
                    continue
                if ex.label is None:
                    continue
                raw = bootstrap.train_example(table, ex, rng, bcfg, lcfg, sampler)
                point = bootstrap.aggregate(raw, bcfg).point
                _record_acc(train_acc, ex, point, config.loss)
                if tracker is not None:
                    record(tracker, ex, point, holdout=False)
                trained += 1
        holdout_ordinals.append(ordinals)

        holdout_mean = None
        if tracker is not None:
            for ex in held:
                record(tracker, ex, bootstrap.predict_example(table, ex, bcfg), holdout=True)
            holdout_mean, improved = end_of_pass(tracker)
            if improved:
                best_weights = table.weights.copy()
                best_pass = pass_no
        if progress is not None:
            tl = train_acc.metrics().mean_loss
            progress.write(f"{pass_no},{n_seen},{_fmt_opt(tl)},{_fmt_opt(holdout_mean)}\n")

    final = table
    if config.passes > 1 and best_weights is not None:
        final = WeightTable(config.bits, config.n_models, best_weights)
        final.counts = table.counts.copy()
    model = ModelFile(final, lcfg)
    if config.final_model:
        model_io.save(model, config.final_model)

    if tracker is None or best_pass is None:
        metrics = train_acc.metrics()
    elif config.passes > 1:
        metrics = tracker.per_pass_metrics[best_pass - 1]
    else:
        metrics = tracker.per_pass_metrics[-1]
    return TrainResult(
        model, metrics, tracker, best_pass, parser.lines_parsed, trained, holdout_ordinals, table
    )


def _record_acc(acc: _Accumulator, ex: Example, point: float, kind: LossKind) -> None:
    acc.add(loss_value(point, ex.label, kind), sign(point) != sign(ex.label), ex.importance)


def _fmt_opt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def _fmt(x: float) -> str:
    return f"{x + 0.0:.9g}"


# --------------------------------------------------------------------------
# prediction


@dataclass
class PredictResult:
    metrics: Metrics
    holdout_metrics: Metrics | None
    count: int


def check_model_flags(model: ModelFile, bits: int | None, n_models: int | None) -> None:
    if bits is not None and bits != model.bits:
        raise ValueError(f"--bits {bits} does not match model bits {model.bits}")
    if n_models is not None and n_models != model.n_models:
        raise ValueError(f"--bootstrap {n_models} does not match model N={model.n_models}")


def run_predict(
    config: RunConfig,
    model: ModelFile,
    out: TextIO,
    bits: int | None = None,
    n_models: int | None = None,
) -> PredictResult:
    """Write ``point,lo,hi[,tag]`` per example.

    Metrics cover every labeled example; when ``config.holdout_period`` is
    set they are also reported for the holdout ordinals alone.
    """
    check_model_flags(model, bits, n_models)
    bcfg = replace(config.bootstrap_config, n_models=model.n_models)
    kind = model.learner.loss
    parser = Parser(ParserConfig(model.bits), config.skip_bad_lines)
    all_acc = _Accumulator()
    hold_acc = _Accumulator()
    period = config.holdout_period
    count = 0
    out.write("point,lo,hi,tag\n")
    with _open_input(config.input) as f:
        for ordinal, ex in enumerate(iter_examples(f, parser, config.pipeline)):
            pred = bootstrap.predict_example(model.table, ex, bcfg)
            row = f"{_fmt(pred.point)},{_fmt(pred.lo)},{_fmt(pred.hi)}"
            if ex.tag is not None:
                row += f",{ex.tag}"
            out.write(row + "\n")
            count += 1
            if ex.label is None:
                continue
            _record_acc(all_acc, ex, pred.point, kind)
            if period and is_holdout(ordinal, period):
                _record_acc(hold_acc, ex, pred.point, kind)
    return PredictResult(all_acc.metrics(), hold_acc.metrics() if period else None, count)


# --------------------------------------------------------------------------
# benchmark and convergence


@dataclass
class BenchmarkRow:
    n: int
    online_seconds: float
    naive_estimate_seconds: float
    pipelined: bool


def _timed_train(config: RunConfig) -> float:
    t0 = time.perf_counter()
    run_train(config)
    return time.perf_counter() - t0


def _head_file(path: str, n_lines: int) -> str:
    import tempfile

    fd, tmp = tempfile.mkstemp(suffix=".txt", prefix="oboot-warmup-")
    with os.fdopen(fd, "wb") as dst, open(path, "rb") as src:
        for i, line in enumerate(src):
            if i >= n_lines:
                break
            dst.write(line)
    return tmp


def run_benchmark(
    config: RunConfig,
    n_values: Iterable[int],
    warmup_lines: int = 1000,
    repeats: int = 1,
) -> list[BenchmarkRow]:
    """Time single-pass training for each N against N x T(1).

    T(1) includes reading and parsing the input, so N x T(1) is the cost of
    training N independent models by rereading the data N times.  A short
    warm-up run over the first ``warmup_lines`` lines (kernel compilation,
    page cache) is excluded from timing.  Each time is the minimum over
    ``repeats`` runs.
    """
    if config.input in (None, "-"):
        raise ValueError("benchmark needs an input file")
    base = replace(config, passes=1, holdout_period=0, final_model=None, predictions=None)
    warm = _head_file(config.input, warmup_lines)
    try:
        for n in sorted(set(n_values) | {1}):
            _timed_train(replace(base, input=warm, n_models=n))
    finally:
        os.unlink(warm)

    def timed(n):
        return min(_timed_train(replace(base, n_models=n)) for _ in range(repeats))

    t1 = timed(1)
    rows = []
    for n in n_values:
        tn = t1 if n == 1 else timed(n)
        rows.append(BenchmarkRow(n, tn, n * t1, config.pipeline))
    return rows


def write_benchmark_csv(rows: list[BenchmarkRow], out: TextIO) -> None:
    out.write("n,online_seconds,naive_estimate_seconds,pipelined\n")
    for r in rows:
        out.write(f"{r.n},{r.online_seconds:.6f},{r.naive_estimate_seconds:.6f},{int(r.pipelined)}\n")


def run_convergence(max_n: int) -> list[tuple[int, float]]:
    """TV distance between Binom(n, 1/n) and Poisson(1) for n = 2, 4, ... <= max_n."""
    if max_n < 2:
        raise ValueError(f"max_n must be >= 2, got {max_n}")
    rows = []
    n = 2
    while n <= max_n:
        rows.append((n, binom_poisson_tv_distance(n)))
        n *= 2
    return rows


def write_convergence_csv(rows, out: TextIO) -> None:
    out.write("n,tv_distance\n")
    for n, d in rows:
        out.write(f"{n},{d!r}\n")
