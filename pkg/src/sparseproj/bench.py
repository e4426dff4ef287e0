"""Benchmarks comparing the simplex-based projection with Hoyer's original scheme.

Every trial draws its input from its own generator seeded by
``(seed, n, trial)``, so results do not depend on the order or the process
in which trials run.
"""

import csv
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baseline import hoyer_project
from .core import project_nonneg, project_scale_free, target_for_sigma

SAMPLERS = ("uniform", "halfnormal")


@dataclass(frozen=True)
class BenchConfig:
    dims: list = field(default_factory=lambda: [1000])
    input_sigma: float = 0.15
    target_sigma: float = 0.90
    trials: int = 1000
    seed: int = 0
    sampler: str = "uniform"
    workers: int = 1

    def __post_init__(self):
        if not self.dims:
            raise ValueError("dims must not be empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")

    def metadata(self):
        return {
            "input_sigma": self.input_sigma,
            "target_sigma": self.target_sigma,
            "trials": self.trials,
            "seed": self.seed,
            "input_sampling": f"{self.sampler} entries, then scale-free projection to input_sigma",
        }


def trial_rng(seed, n, trial):
    return np.random.default_rng([seed, n, trial])


def random_input(n, sigma_in, rng, sampler="uniform"):
    """Non-negative random vector with sparseness exactly ``sigma_in``."""
    if sampler == "uniform":
        x = rng.random(n)
    elif sampler == "halfnormal":
        x = np.abs(rng.standard_normal(n))
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    return np.abs(project_scale_free(x, target_for_sigma(n, sigma_in)))


def run_trial(args):
    """Iteration counts and per-iteration working sizes for one input.

    Returns ``(original_iters, improved_iters, original_sizes, improved_sizes)``.
    """
    n, trial, cfg = args
    x = random_input(n, cfg.input_sigma, trial_rng(cfg.seed, n, trial), cfg.sampler)
    t = target_for_sigma(n, cfg.target_sigma)
    _, base = hoyer_project(x, t)
    res = project_nonneg(x, t)
    improved = [it.d for it in res.trace.iterations]
    return base.iterations, len(improved), list(base.support_per_iteration), improved


def _map(cfg, jobs):
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(run_trial, jobs, chunksize=16))
    return [run_trial(j) for j in jobs]


def iteration_counts(cfg):
    """Per-trial iteration counts as ``{n: (original, improved)}`` integer arrays."""
    out = {}
    for n in cfg.dims:
        results = _map(cfg, [(n, k, cfg) for k in range(cfg.trials)])
        out[n] = (
            np.array([r[0] for r in results]),
            np.array([r[1] for r in results]),
        )
    return out


def iteration_rows(counts):
    rows = []
    for n, (orig, impr) in counts.items():
        for algo, c in (("original", orig), ("improved", impr)):
            rows.append((n, algo, float(c.mean()), int(c.min()), int(c.max())))
    return rows


def _pad(sizes, length):
    # trials that finished early keep their final working size
    return sizes + [sizes[-1]] * (length - len(sizes))


def support_decay(cfg):
    """Rows ``(iteration, algo, mean_support_fraction)`` for ``cfg.dims[0]``."""
    n = cfg.dims[0]
    results = _map(cfg, [(n, k, cfg) for k in range(cfg.trials)])
    rows = []
    for algo, col in (("original", 2), ("improved", 3)):
        length = max(len(r[col]) for r in results)
        sizes = np.array([_pad(r[col], length) for r in results], dtype=float)
        for i, frac in enumerate(sizes.mean(axis=0) / n, start=1):
            rows.append((i, algo, float(frac)))
    return rows


def _time_batch(fn, inputs, t):
    start = time.perf_counter()
    for x in inputs:
        fn(x, t)
    return time.perf_counter() - start


def speedup_cell(n, sigma_in, cfg, min_seconds=0.1, repeats=5):
    """Timing ratio original/improved on one grid cell.

    Iteration columns come from the first ``cfg.trials`` inputs and are
    deterministic; the number of timed calls grows until one batch of the
    original method takes ``min_seconds``.
    """
    cell = BenchConfig([n], sigma_in, cfg.target_sigma, cfg.trials, cfg.seed, cfg.sampler)
    t = target_for_sigma(n, cfg.target_sigma)

    def inputs(k):
        return [random_input(n, sigma_in, trial_rng(cfg.seed, n, i), cfg.sampler) for i in range(k)]

    counts = [run_trial((n, i, cell))[:2] for i in range(cfg.trials)]
    batch = inputs(cfg.trials)
    while _time_batch(hoyer_project, batch, t) < min_seconds:
        batch = inputs(2 * len(batch))
    orig = statistics.median(_time_batch(hoyer_project, batch, t) for _ in range(repeats))
    impr = statistics.median(_time_batch(project_nonneg, batch, t) for _ in range(repeats))
    return {
        "n": n,
        "sigma_in": sigma_in,
        "mean_iters_original": float(np.mean([c[0] for c in counts])),
        "mean_iters_improved": float(np.mean([c[1] for c in counts])),
        "time_ratio": orig / impr,
        "timed_calls": len(batch),
    }


SPEEDUP_COLUMNS = ("n", "sigma_in", "mean_iters_original", "mean_iters_improved", "time_ratio", "timed_calls")
SPEEDUP_TIMING_COLUMNS = ("time_ratio", "timed_calls")


def format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(stream, header, rows, metadata=None):
    """CSV with ``#``-prefixed metadata lines followed by a header row."""
    for key, value in (metadata or {}).items():
        stream.write(f"# {key}: {value}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])


def read_csv(stream):
    """Inverse of :func:`write_csv`: ``(metadata, header, rows)`` with string cells."""
    meta, lines = {}, []
    for line in stream:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
        else:
            lines.append(line)
    table = list(csv.reader(lines))
    return meta, table[0], table[1:]
