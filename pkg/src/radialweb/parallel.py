"""Trial-chunk parallelism.

Work is split into contiguous trial ranges; each range draws only from its
own per-trial streams, and results are reassembled in trial order, so the
output never depends on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

ENV_THREADS = "RADIALWEB_THREADS"


def resolve_workers(workers: int | None) -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        workers = int(env)
    return max(1, int(workers or 1))


def _chunks(n_trials: int, workers: int, chunk: int | None):
    if chunk is None:
        chunk = max(1, min(5000, -(-n_trials // (4 * workers))))
    return [(lo, min(lo + chunk, n_trials)) for lo in range(0, n_trials, chunk)]


def map_trials(fn, n_trials: int, workers: int | None = 1, chunk: int | None = None):
    """Evaluate ``fn(lo, hi)`` over trial ranges and concatenate in order.

    ``fn`` must be picklable (a module-level function or a partial of one)
    and return an array whose first axis indexes trials.
    """
    workers = resolve_workers(workers)
    ranges = _chunks(n_trials, workers, chunk)
    if not ranges:
        return fn(0, 0)
    if workers == 1:
        parts = [fn(lo, hi) for lo, hi in ranges]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, [r[0] for r in ranges], [r[1] for r in ranges]))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)
