"""Deterministic thread-pool helpers.

Worker count comes from the TEAMDP_THREADS environment variable (0 or unset
means automatic).  Results are always returned in input order, so callers get
identical answers regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Configured worker count; 0/unset/invalid means use the CPU count."""
    raw = os.environ.get("TEAMDP_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def map_ordered(fn, items, parallel=True):
    """Apply fn to items, preserving input order in the result list."""
    items = list(items)
    n = worker_count()
    if not parallel or n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
