#!/usr/bin/env python3
"""
parallel.py - Chunked thread-pool execution for assembly and field loops

Each chunk writes into its own slice of a preallocated result, so the output
does not depend on the number of worker threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple

_default_threads = 1


def set_default_threads(threads: int) -> None:
    """Set the process-wide worker count used when callers pass threads=None."""
    global _default_threads
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    _default_threads = int(threads)
    logging.debug(f"Default worker threads set to {_default_threads}")


def get_default_threads() -> int:
    return _default_threads


def chunk_bounds(n_items: int, chunk_size: int) -> List[Tuple[int, int]]:
    """Split range(n_items) into contiguous [start, stop) chunks."""
    chunk_size = max(1, int(chunk_size))
    return [(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def run_chunks(func: Callable[[int, int], None], n_items: int, chunk_size: int,
               threads: int = None) -> None:
    """
    Call func(start, stop) for every chunk of range(n_items).

    Args:
        func: worker writing its results for items [start, stop)
        n_items: total number of items
        chunk_size: items per chunk
        threads: worker threads (None uses the process default)
    """
    bounds = chunk_bounds(n_items, chunk_size)
    threads = _default_threads if threads is None else threads
    if threads <= 1 or len(bounds) <= 1:
        for start, stop in bounds:
            func(start, stop)
        return

    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = [executor.submit(func, start, stop) for start, stop in bounds]
        for future in futures:
            future.result()
