"""
Seed-parallel execution. Each seed runs independently; results come back in
the order of the seed list regardless of completion order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed

from config import default_workers

logger = logging.getLogger(__name__)


def map_seeds(fn, seeds, workers=None):
    """[fn(seed) for seed in seeds], run on a thread pool when workers > 1."""
    seeds = list(seeds)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers <= 1 or len(seeds) <= 1:
        results = []
        for seed in seeds:
            logger.info("seed %s started", seed)
            results.append(fn(seed))
            logger.info("seed %s finished", seed)
        return results

    results = [None] * len(seeds)
    with ThreadPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        futures = {pool.submit(fn, seed): i for i, seed in enumerate(seeds)}
        for fut in as_completed(futures):
            i = futures[fut]
            # Exceptions propagate; the pool cancels nothing already running.
            results[i] = fut.result()
            logger.info("seed %s finished", seeds[i])
    return results
