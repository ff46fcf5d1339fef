"""Chain Pool Worker - runs independent Monte Carlo chains concurrently.

Each chain is strictly sequential; distinct seeds run on a thread pool and
their batches are merged by a pure reducer.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Dict, List, Optional, Sequence

from src.config import settings
from src.core.errors import EnsembleError
from src.core.models import EnsembleConfig, SampleBatch
from src.services.ensembles import sample

logger = logging.getLogger(__name__)


def merge_batches(batches: Sequence[SampleBatch]) -> SampleBatch:
    """Pool draws of several chains; order follows the input order."""
    if not batches:
        raise EnsembleError("nothing to merge")
    labels = batches[0].labels()
    if any(b.labels() != labels or b.N != batches[0].N for b in batches):
        raise EnsembleError("batches disagree on labels or matrix size")
    draws: Dict[str, List[List[float]]] = {label: [] for label in labels}
    for b in batches:
        for label in labels:
            draws[label].extend(b.eigenvalue_draws[label])
    total = sum(len(b.eigenvalue_draws[labels[0]]) for b in batches)
    rate = sum(b.acceptance_rate * len(b.eigenvalue_draws[labels[0]]) for b in batches) / total
    return SampleBatch(
        eigenvalue_draws=draws,
        acceptance_rate=rate,
        effective_samples=sum(b.effective_samples for b in batches),
        N=batches[0].N,
        regularized=any(b.regularized for b in batches),
        seed=batches[0].seed,
    )


class ChainPool:
    """Thread pool of independent chains with a start/stop lifecycle."""

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.worker_count
        self._executor: Optional[ThreadPoolExecutor] = None
        self._running = False

        self.stats = {
            "chains_finished": 0,
            "chains_failed": 0,
            "started_at": None,
        }

    async def start(self):
        """Start the pool."""
        if self._running:
            logger.warning("Chain pool already running")
            return
        self._executor = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="chain")
        self._running = True
        self.stats["started_at"] = datetime.utcnow()
        logger.info(f"Chain pool started with {self.workers} workers")

    async def stop(self):
        """Stop the pool and wait for running chains."""
        if not self._running:
            return
        self._running = False
        if self._executor:
            self._executor.shutdown(wait=True)
            self._executor = None
        logger.info(
            f"Chain pool stopped: {self.stats['chains_finished']} finished, "
            f"{self.stats['chains_failed']} failed"
        )

    async def _run_one(self, config: EnsembleConfig) -> SampleBatch:
        loop = asyncio.get_running_loop()
        try:
            batch = await loop.run_in_executor(self._executor, sample, config)
        except Exception:
            self.stats["chains_failed"] += 1
            raise
        self.stats["chains_finished"] += 1
        return batch

    async def run_chains(self, config: EnsembleConfig, seeds: Sequence[int]) -> List[SampleBatch]:
        """One chain per seed, returned in seed order."""
        if not self._running:
            raise EnsembleError("chain pool is not running")
        configs = [config.model_copy(update={"seed": int(s)}) for s in seeds]
        return list(await asyncio.gather(*(self._run_one(c) for c in configs)))

    async def run_merged(self, config: EnsembleConfig, seeds: Sequence[int]) -> SampleBatch:
        return merge_batches(await self.run_chains(config, seeds))


def run_chains_blocking(config: EnsembleConfig, seeds: Sequence[int]) -> SampleBatch:
    """Synchronous entry point used by the CLI."""

    async def _go() -> SampleBatch:
        pool = ChainPool()
        await pool.start()
        try:
            return await pool.run_merged(config, seeds)
        finally:
            await pool.stop()

    return asyncio.run(_go())
