"""Seeded, sharded random streams.

Every random draw in the package comes from a Philox counter-based
generator keyed by ``(seed, stream, shard)``. The stream is a named purpose
("moments", "tail", ...) hashed to a stable integer with CRC-32; the shard
index enumerates fixed-size sample blocks. Gaussian variates use NumPy's
``Generator.standard_normal`` (ziggurat). Shard boundaries depend only on
the sample count and the row width, never on the number of workers, so
results are identical for any worker count.
"""
import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_SHARD_BUDGET = 1 << 21  # doubles per shard block
_MIN_ROWS = 64
_MAX_ROWS = 8192


def stream_id(name):
    return zlib.crc32(name.encode("utf-8"))


def generator(seed, stream, shard=0):
    """Independent generator for ``(seed, stream, shard)``."""
    if isinstance(stream, str):
        stream = stream_id(stream)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(shard)))
    return np.random.Generator(np.random.Philox(ss))


def default_workers():
    try:
        return max(1, int(os.environ.get("LPDVO_WORKERS", "1")))
    except ValueError:
        return 1


def shard_rows(width):
    rows = _SHARD_BUDGET // max(1, int(width))
    return int(min(_MAX_ROWS, max(_MIN_ROWS, rows)))


def shard_plan(samples, width):
    """List of shard sizes covering ``samples`` rows of ``width`` columns."""
    if samples <= 0:
        return []
    step = shard_rows(width)
    full, rest = divmod(int(samples), step)
    return [step] * full + ([rest] if rest else [])


def map_shards(fn, seed, stream, samples, width, workers=None):
    """Call ``fn(rng, rows)`` for each shard; return results in shard order."""
    plan = shard_plan(samples, width)
    workers = default_workers() if workers is None else max(1, int(workers))

    def job(item):
        idx, rows = item
        return fn(generator(seed, stream, idx), rows)

    items = list(enumerate(plan))
    if workers == 1 or len(items) <= 1:
        return [job(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, items))


def gaussian_rows(rng, rows, n):
    return rng.standard_normal((rows, n))
