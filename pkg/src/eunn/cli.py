"""Command-line entry point: ``python -m eunn {train,decompose,reconstruct,bench,verify}``.

Exit codes: 0 success, 1 validation or configuration error, 2 training
diverged, 3 invariant failure.
"""

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import io as fio
from . import unitary
from .bench import run_bench
from .cell import init_eurnn, init_vanilla
from .errors import (ConfigError, DimensionError, IngestionError, InvalidPlanError, ParseError,
                     UnsupportedDimensionError, ValidationError)
from .optim import TrainConfig, metrics_csv, train
from .perf import tune_allocator
from .tasks import DATA_DIR_ENV, CopyTask, CopyTaskConfig, MnistConfig, MnistTask
from .verify import format_table, run_all

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_INVARIANT = 0, 1, 2, 3
ROUNDTRIP_TOL = 1e-8

log = logging.getLogger("eunn")


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_config_flags(p):
    for f in dataclasses.fields(TrainConfig):
        if f.type is bool:
            p.add_argument(_flag(f.name), dest=f.name, default=None, action=argparse.BooleanOptionalAction)
        else:
            p.add_argument(_flag(f.name), dest=f.name, type=f.type, default=None,
                           help=f"default: {f.default!r}")


def resolve_config(args):
    """Defaults, then the config file, then flags; the data directory falls back to the environment."""
    values = {}
    if args.config:
        values.update(fio.read_config(args.config, TrainConfig))
    for f in dataclasses.fields(TrainConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = TrainConfig(**values)
    if cfg.task == "mnist" and not cfg.data_dir:
        cfg = dataclasses.replace(cfg, data_dir=os.environ.get(DATA_DIR_ENV, os.path.join("data", "mnist")))
    return cfg


def build_experiment(cfg):
    """Seeded cell, task and training stream for a resolved config.

    One root seed is split into independent streams for initialisation,
    training batches and the validation set.
    """
    init_ss, data_ss, val_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    gen = lambda ss: np.random.Generator(np.random.PCG64(ss))
    if cfg.task == "copy":
        task = CopyTask(CopyTaskConfig(cfg.n_symbols, cfg.m_len, cfg.t_delay, cfg.batch), gen(val_ss))
    else:
        task = MnistTask(MnistConfig(cfg.data_dir, cfg.perm_seed, cfg.train_subset, cfg.val_holdout,
                                     cfg.val_size, cfg.downsample, cfg.batch))
    init_rng = gen(init_ss)
    if cfg.model == "vanilla":
        cell = init_vanilla(task.n_in, cfg.n_hidden, task.n_out, init_rng, cfg.spectral_radius)
    else:
        style = "fft" if cfg.model == "eurnn-fft" else "tunable"
        cell = init_eurnn(task.n_in, cfg.n_hidden, task.n_out, init_rng, style, cfg.capacity)
    return cell, task, gen(data_ss)


def cmd_train(args):
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    fio.write_config(os.path.join(args.out, "config.resolved"), cfg)
    cell, task, rng = build_experiment(cfg)
    with open(os.path.join(args.out, "metrics.csv"), "w") as fh:
        fh.write(metrics_csv([]))
        fh.flush()

        def on_record(rec):
            fh.write(metrics_csv([rec]).split("\n", 1)[1])
            if rec.val_metric is not None:
                log.info("iter %d loss %.6g val %.6g", rec.iter + 1, rec.loss, rec.val_metric)

        run = train(cfg, cell, task, rng, on_record)
    fio.save_checkpoint(os.path.join(args.out, "checkpoint.npz"), cell, cfg)
    if run.diverged:
        print(f"training diverged: {run.diagnostic}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"wrote {args.out}/metrics.csv ({len(run.records)} records)")
    return EXIT_OK


def cmd_decompose(args):
    m = fio.read_matrix(args.input)
    program = unitary.decompose_unitary(m)
    fio.write_program(args.output, program)
    err = float(np.max(np.abs(unitary.reconstruct(fio.read_program(args.output)) - m)))
    print(f"{len(program.rotations)} rotations; round-trip max-entry error {err:.3e}")
    return EXIT_OK if err < ROUNDTRIP_TOL else EXIT_INVARIANT


def cmd_reconstruct(args):
    m = unitary.reconstruct(fio.read_program(args.input))
    fio.write_matrix(args.output, m)
    print(f"wrote {m.shape[0]}x{m.shape[0]} matrix; unitarity error {unitary.unitarity_error(m):.3e}")
    return EXIT_OK


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_bench(args):
    report = run_bench(args.dims, args.capacities, args.style, args.batch, args.repeats, seed=args.seed)
    text = report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args):
    results = run_all(fault=args.inject_fault)
    print(format_table(results))
    ok = all(r.passed for r in results)
    print("all invariants hold" if ok else "INVARIANT FAILURE")
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser():
    parser = argparse.ArgumentParser(prog="eunn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write metrics.csv, config.resolved, checkpoint.npz")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--out", default="run", help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decompose", help="factor a unitary matrix file into an angle program")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="rebuild a matrix file from an angle program")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("bench", help="time apply+backward against a dense reference")
    p.add_argument("--dims", type=_int_list, default=[128, 256, 512, 1024])
    p.add_argument("--capacities", type=_int_list, default=[2])
    p.add_argument("--style", choices=["tunable", "fft"], default="tunable")
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--repeats", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (also printed)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--inject-fault", action="store_true", help="corrupt one angle kernel (negative control)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    tune_allocator()
    try:
        return args.func(args)
    except (ConfigError, ParseError, ValidationError, DimensionError, IngestionError,
            UnsupportedDimensionError, InvalidPlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
