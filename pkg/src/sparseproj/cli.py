"""Command line driver: ``sparseproj <subcommand> [options]``.

Options can also come from an INI file given by ``--config``; each
subcommand reads the section of the same name and command line flags take
precedence. Set ``SPARSEPROJ_LOG`` (e.g. ``INFO`` or ``DEBUG``) for progress
messages on stderr.
"""

import argparse
import configparser
import contextlib
import logging
import os
import sys

import numpy as np

from . import bench, soae
from .core import SparseTarget, project_l0, project_nonneg, project_unrestricted, target_for_sigma
from .data import load_idx, split

log = logging.getLogger("sparseproj")


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(float(v)) for v in str(text).replace(",", " ").split()]


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def _bench_config(args):
    return bench.BenchConfig(
        dims=args.dims,
        input_sigma=args.input_sigma,
        target_sigma=args.target_sigma,
        trials=args.trials,
        seed=args.seed,
        sampler=args.sampler,
        workers=args.workers,
    )


def cmd_iterations(args):
    cfg = _bench_config(args)
    rows = bench.iteration_rows(bench.iteration_counts(cfg))
    with _output(args.output) as out:
        bench.write_csv(out, ("n", "algo", "mean_iters", "min_iters", "max_iters"), rows, cfg.metadata())


def cmd_support_decay(args):
    cfg = _bench_config(args)
    rows = bench.support_decay(cfg)
    with _output(args.output) as out:
        bench.write_csv(out, ("iteration", "algo", "mean_support_fraction"), rows, {"n": cfg.dims[0], **cfg.metadata()})


def cmd_speedup(args):
    cfg = _bench_config(args)
    rows = []
    for n in cfg.dims:
        for s in args.input_sigmas:
            log.info("timing n=%d sigma_in=%g", n, s)
            cell = bench.speedup_cell(n, s, cfg, min_seconds=args.min_seconds)
            rows.append(tuple(cell[c] for c in bench.SPEEDUP_COLUMNS))
    meta = cfg.metadata()
    meta["timing"] = f"median of 5 batches, each at least {args.min_seconds} s"
    with _output(args.output) as out:
        bench.write_csv(out, bench.SPEEDUP_COLUMNS, rows, meta)


def _transfer(args):
    if args.transfer == "sigma":
        return soae.SigmaProjection(args.sigma_h)
    if args.transfer == "l0":
        return soae.L0Projection(args.kappa)
    return soae.Tanh()


def _soae_config(args, transfer=None):
    return soae.SoaeConfig(
        n_hidden=args.n_hidden,
        sigma_W=args.sigma_w,
        transfer=transfer or _transfer(args),
        step_size=args.step_size,
        samples_per_epoch=args.samples_per_epoch or args.train_size,
        alpha_timescale=args.alpha_timescale,
        stop_rel_tol=args.stop_rel_tol,
        stop_window=args.stop_window,
        max_epochs=args.epochs,
        seed=args.seed,
    )


def _load_split(args):
    try:
        ds = load_idx(args.images, args.labels)
    except (OSError, ValueError) as e:
        raise SystemExit(f"cannot load dataset {args.images} / {args.labels}: {e}")
    return split(ds, args.train_size, args.eval_size, args.seed)


def cmd_train(args):
    cfg = _soae_config(args)
    train, held_out = _load_split(args)
    rng = np.random.default_rng(cfg.seed)
    params = soae.init_params(train.samples, cfg, rng)
    rows = []

    def on_epoch(nu, p, mean_loss):
        err = ""
        if nu % args.eval_every == 0:
            err = soae.error_rate(p, held_out, cfg)
        rows.append((nu, mean_loss, cfg.alpha(nu), cfg.step(nu), err))
        log.info("epoch %d loss %.6f eval_error %s", nu, mean_loss, err)

    params, _ = soae.train(params, train, cfg, rng, on_epoch=on_epoch)
    if args.checkpoint:
        soae.save_checkpoint(args.checkpoint, params, cfg)
    meta = {"train_size": len(train), "eval_size": len(held_out), "seed": cfg.seed, "pixel_scaling": "1/255"}
    with _output(args.output) as out:
        bench.write_csv(out, ("epoch", "mean_loss", "alpha", "step", "eval_error"), rows, meta)


def activity(params, samples, cfg):
    """Number of nonzero hidden units for every sample."""
    return np.array([np.count_nonzero(soae.forward(params, x, cfg).h) for x in samples])


def cmd_activity_sweep(args):
    train, held_out = _load_split(args)
    rows = []
    for s in args.sigma_hs:
        cfg = _soae_config(args, soae.SigmaProjection(s))
        rng = np.random.default_rng(cfg.seed)
        params = soae.init_params(train.samples, cfg, rng)
        params, _ = soae.train(params, train, cfg, rng)
        l0 = activity(params, held_out.samples, cfg)
        log.info("sigma_H=%g mean_l0=%.3f", s, l0.mean())
        rows.append((s, float(l0.mean()), float(l0.std())))
    meta = {"n_hidden": args.n_hidden, "epochs": args.epochs, "seed": args.seed}
    with _output(args.output) as out:
        bench.write_csv(out, ("sigma_H", "mean_l0", "std_l0"), rows, meta)


def read_vector(path):
    with open(path) as f:
        text = "\n".join(line for line in f if not line.lstrip().startswith("#"))
    return np.array(_floats(text))


def cmd_project(args):
    x = read_vector(args.input)
    n = len(x)
    if args.l0 is not None:
        point, iterations = project_l0(x, args.l0), 0
    else:
        if (args.sigma is None) == (args.lambda1 is None):
            raise SystemExit("give exactly one of --sigma and --lambda1 (or use --l0)")
        if args.sigma is not None:
            base = target_for_sigma(n, args.sigma)
            t = SparseTarget(n, base.lambda1 * args.lambda2, args.lambda2)
        else:
            t = SparseTarget(n, args.lambda1, args.lambda2)
        res = (project_nonneg if args.nonneg else project_unrestricted)(x, t)
        point, iterations = res.point, len(res.trace.iterations)
    print(" ".join(repr(float(v)) for v in point))
    print(f"iterations: {iterations}")


def _bench_options(p, dims):
    p.add_argument("--dims", type=_ints, default=dims, help="comma separated dimensions")
    p.add_argument("--input-sigma", type=float, default=0.15)
    p.add_argument("--target-sigma", type=float, default=0.90)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--sampler", choices=bench.SAMPLERS, default="uniform")
    p.add_argument("--workers", type=int, default=1)


def _soae_options(p, epochs):
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--eval-size", type=int, default=1000)
    p.add_argument("--n-hidden", type=int, default=64)
    p.add_argument("--sigma-w", type=float, default=0.75)
    p.add_argument("--step-size", type=float, default=0.2)
    p.add_argument("--samples-per-epoch", type=int, default=None, help="defaults to the training set size")
    p.add_argument("--alpha-timescale", type=float, default=100.0)
    p.add_argument("--epochs", type=int, default=epochs, help="maximum number of epochs")
    p.add_argument("--stop-rel-tol", type=float, default=1e-4)
    p.add_argument("--stop-window", type=int, default=10)


def build_parser():
    parser = argparse.ArgumentParser(prog="sparseproj", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI file with one section per subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--output", default="-", help="output CSV path (default stdout)")
        return p

    p = add("iterations", cmd_iterations, "iteration counts of both algorithms")
    _bench_options(p, [1000, 10000, 100000])

    p = add("support-decay", cmd_support_decay, "mean working support per iteration")
    _bench_options(p, [1000])

    p = add("speedup", cmd_speedup, "run time ratio original / improved")
    _bench_options(p, [2**k for k in range(4, 14)])
    p.add_argument("--input-sigmas", type=_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    p.add_argument("--min-seconds", type=float, default=0.1)
    p.set_defaults(trials=20)

    p = add("train", cmd_train, "train a sparse supervised auto-encoder")
    _soae_options(p, epochs=100)
    p.add_argument("--transfer", choices=("sigma", "l0", "tanh"), default="sigma")
    p.add_argument("--sigma-h", type=float, default=0.6)
    p.add_argument("--kappa", type=int, default=10)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--checkpoint", help="where to store the trained parameters")

    p = add("activity-sweep", cmd_activity_sweep, "hidden activity versus sigma_H")
    _soae_options(p, epochs=10)
    p.add_argument("--sigma-hs", type=_floats, default=[0.2, 0.5, 0.8, 0.95])

    p = add("project", cmd_project, "project one vector read from a text file")
    p.add_argument("input", help="file with numbers separated by whitespace or commas")
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--l0", type=int, metavar="KAPPA")
    return parser


def _apply_config(parser, argv):
    """Install defaults from the INI file named by ``--config``."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    ini = configparser.ConfigParser()
    if not ini.read(known.config):
        raise SystemExit(f"cannot read config file {known.config}")
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices.get(command)
    if sp is None or not ini.has_section(command):
        return
    actions = {a.dest: a for a in sp._actions}
    values = {}
    for key, raw in ini.items(command):
        dest = key.replace("-", "_")
        if dest not in actions:
            raise SystemExit(f"unknown option {key!r} in section [{command}]")
        action = actions[dest]
        if isinstance(action, argparse._StoreTrueAction):
            values[dest] = ini.getboolean(command, key)
        else:
            values[dest] = action.type(raw) if action.type else raw
            if action.required:
                action.required = False
    sp.set_defaults(**values)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    level = os.environ.get("SPARSEPROJ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(message)s")
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
