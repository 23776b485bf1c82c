"""Counter-based random streams and block-parallel replication."""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable
from typing import Sequence

import numpy as np

from semicross.v1.config import REPLICATION_BLOCK

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny


def _tag_key(tag: str) -> int:
    # hash() is salted per process
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=4).digest(), "little")


def replication_stream(seed: int, tag: str, index: int) -> np.random.Generator:
    """Independent Philox stream for one (seed, purpose, block) triple."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(_tag_key(tag), int(index)))
    return np.random.Generator(np.random.Philox(sequence))


def open_uniforms(rng: np.random.Generator, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
    """Uniform variates strictly inside (0, 1)."""
    u = rng.random(size)
    if size is None:
        return u if u > 0.0 else float(_TINY)
    return np.where(u > 0.0, u, _TINY)


@dataclass(frozen=True)
class BlockMoments:
    count: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values: np.ndarray) -> BlockMoments:
        count = int(values.size)
        if count == 0:
            return cls(0, 0.0, 0.0)
        mean = float(np.mean(values))
        return cls(count, mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: BlockMoments) -> BlockMoments:
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return BlockMoments(count, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        """Standard error of the mean."""
        return math.sqrt(self.variance / self.count) if self.count else math.nan


def combine_moments(blocks: Sequence[np.ndarray]) -> BlockMoments:
    """Chan's pairwise merge of per-block (count, mean, M2), in block order."""
    total = BlockMoments(0, 0.0, 0.0)
    for values in blocks:
        total = total.merge(BlockMoments.of(values))
    return total


def block_sizes(m: int, block: int = REPLICATION_BLOCK) -> list[int]:
    full, rest = divmod(m, block)
    return [block] * full + ([rest] if rest else [])


def replicate(
    block_fn: Callable[[np.random.Generator, int], np.ndarray],
    m: int,
    seed: int,
    tag: str,
    workers: int = 1,
) -> BlockMoments:
    """Run ``m`` i.i.d. replications in fixed-size blocks and merge their moments.

    Block ``b`` always draws from ``replication_stream(seed, tag, b)`` and the
    merge happens in block order, so the result does not depend on
    ``workers``. Each block is reduced to (count, mean, M2) as soon as it is
    produced.
    """
    if m < 1:
        raise ValueError(f"replication count must be positive, got {m}")
    sizes = block_sizes(m)

    def _one(index: int) -> BlockMoments:
        rng = replication_stream(seed, tag, index)
        return BlockMoments.of(np.asarray(block_fn(rng, sizes[index]), dtype=float))

    if workers <= 1 or len(sizes) == 1:
        total = BlockMoments(0, 0.0, 0.0)
        for index in range(len(sizes)):
            total = total.merge(_one(index))
        return total

    pool_size = min(workers, len(sizes))
    logger.debug("Running %d blocks of %s on %d threads", len(sizes), tag, pool_size)
    with ThreadPoolExecutor(max_workers=pool_size) as pool:
        parts = list(pool.map(_one, range(len(sizes))))
    total = BlockMoments(0, 0.0, 0.0)
    for part in parts:
        total = total.merge(part)
    return total
