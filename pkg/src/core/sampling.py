"""Chunked, counter-based random streams.

A run of ``n`` rounds is cut into fixed-size chunks and chunk ``i`` always draws from
``Philox(SeedSequence([seed, ..., i]))``. Chunk boundaries never depend on the worker
count and results are merged in chunk order, so a seed fixes the output bit for bit.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from numpy.random import Generator, Philox, SeedSequence

CHUNK_ROUNDS = 65536

T = TypeVar("T")


def chunk_sizes(n_rounds: int, chunk: int = CHUNK_ROUNDS) -> List[int]:
    full, rest = divmod(n_rounds, chunk)
    return [chunk] * full + ([rest] if rest else [])


def chunk_generator(seed: int, index: int, stream: Optional[Sequence[int]] = None) -> Generator:
    """Independent generator for one chunk; ``stream`` separates unrelated experiments."""
    entropy = [int(seed), *(stream or ()), int(index)]
    return Generator(Philox(SeedSequence(entropy)))


def map_chunks(
    work: Callable[[int, Generator], T],
    n_rounds: int,
    seed: int,
    threads: int = 1,
    stream: Optional[Sequence[int]] = None,
) -> List[T]:
    """Run ``work(size, rng)`` for every chunk and return the results in chunk order."""
    sizes = chunk_sizes(n_rounds)

    def run(index: int) -> T:
        return work(sizes[index], chunk_generator(seed, index, stream))

    if threads <= 1 or len(sizes) <= 1:
        return [run(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(sizes))))
