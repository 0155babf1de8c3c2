"""Counter-based random streams and replicate-block execution.

Every random draw in the package comes from a Philox generator keyed by
``(seed, stream, index)`` where ``index`` is a replicate number or a fixed
draw-block number.  Work is cut into fixed-size blocks and the block results
are concatenated in block order, so a run gives the same numbers whether the
blocks are evaluated serially or by a process pool.

Typical usage::

    from wito.engine.replicates import map_blocks
    values = map_blocks(partial(_one_block, model=model, seed=7), n=10_000, block=256, workers=4)
"""

from __future__ import annotations

import logging
import zlib
from multiprocessing import Pool
from typing import Callable, List, Sequence, Tuple

import numpy as np

LOGGER = logging.getLogger(__name__)

DEFAULT_BLOCK = 256


def stream_id(name: str) -> int:
    """Stable non-negative integer for a named stream (CRC32 of the name)."""
    return zlib.crc32(str(name).encode("utf-8")) & 0xFFFFFFFF


def replicate_rng(seed: int, stream: str | int, index: int) -> np.random.Generator:
    """Philox generator keyed by (seed, stream, index)."""
    if seed < 0:
        raise ValueError(f"seed must be >= 0 (got {seed})")
    if index < 0:
        raise ValueError(f"replicate index must be >= 0 (got {index})")
    key = stream if isinstance(stream, int) else stream_id(stream)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(key), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def block_ranges(n: int, block: int = DEFAULT_BLOCK) -> List[Tuple[int, int]]:
    """Half-open [start, stop) ranges of a fixed block size covering 0..n-1."""
    if n < 0:
        raise ValueError(f"n must be >= 0 (got {n})")
    if block < 1:
        raise ValueError(f"block must be >= 1 (got {block})")
    return [(start, min(start + block, n)) for start in range(0, n, block)]


def _call_block(args: Tuple[Callable[[int, int], np.ndarray], int, int]) -> np.ndarray:
    fn, start, stop = args
    return np.asarray(fn(start, stop))


def map_blocks(
    fn: Callable[[int, int], np.ndarray],
    n: int,
    *,
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> np.ndarray:
    """
    Evaluate ``fn(start, stop)`` on every block and concatenate along axis 0.

    ``fn`` must be picklable when ``workers > 1`` (a module-level function or a
    functools.partial of one).  The block size, not the worker count, fixes
    which generator produces which number.
    """
    ranges = block_ranges(n, block)
    if not ranges:
        return np.empty((0,))
    tasks = [(fn, start, stop) for start, stop in ranges]
    if workers <= 1 or len(tasks) == 1:
        parts: Sequence[np.ndarray] = [_call_block(t) for t in tasks]
    else:
        LOGGER.debug("Dispatching %d blocks to %d workers", len(tasks), workers)
        with Pool(processes=workers) as pool:
            parts = pool.map(_call_block, tasks, chunksize=1)
    return np.concatenate(parts, axis=0)


__all__ = ["DEFAULT_BLOCK", "block_ranges", "map_blocks", "replicate_rng", "stream_id"]
