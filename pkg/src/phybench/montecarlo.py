# Monte-Carlo plumbing: per-trial random streams and a worker pool.

import logging
import queue
import threading
from typing import Callable

import numpy as np
from tqdm import tqdm

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

# stream ids keep the random draws of unrelated stages independent
STREAM_EVAL = 0
STREAM_TRAINING = 1
STREAM_DATASET = 2


def trial_seed(master_seed: int, stream: int, snr_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(stream, snr_index, trial_index))


def trial_rng(master_seed: int, stream: int, snr_index: int, trial_index: int) -> np.random.Generator:
    """Generator for one (stream, SNR point, trial); independent of worker count."""
    return np.random.default_rng(trial_seed(master_seed, stream, snr_index, trial_index))


def derived_seed(master_seed: int, stream: int, index: int) -> int:
    """Integer seed for a consumer that takes a plain seed (network init, shuffling)."""
    return int(trial_seed(master_seed, stream, index, 0).generate_state(1, np.uint32)[0])


class TrialRunner:
    """Runs independent trials, inline or on a pool of worker threads.

    Threading model (queue-based, like a request/response bridge):
      - the caller puts trial indices on _req_queue, then one None
        sentinel per worker
      - each worker takes indices, runs the trial, puts (index, ok, value)
        on _resp_queue
      - the caller collects exactly one response per trial and returns
        results in trial-index order, so reductions never depend on
        completion order
    """

    def __init__(self, workers: int = 1, progress: bool = False):
        if workers < 1:
            raise InvalidInputError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.progress = progress
        self._req_queue: queue.Queue = queue.Queue()
        self._resp_queue: queue.Queue = queue.Queue()

    def map(self, fn: Callable[[int], object], count: int, desc: str = "trials") -> list:
        bar = tqdm(total=count, desc=desc, disable=not self.progress, leave=False)
        try:
            if self.workers == 1 or count <= 1:
                out = []
                for i in range(count):
                    out.append(fn(i))
                    bar.update()
                return out
            return self._map_threads(fn, count, bar)
        finally:
            bar.close()

    def _map_threads(self, fn, count: int, bar) -> list:
        n_threads = min(self.workers, count)
        for i in range(count):
            self._req_queue.put(i)
        for _ in range(n_threads):
            self._req_queue.put(None)

        threads = [threading.Thread(target=self._worker, args=(fn,), daemon=True)
                   for _ in range(n_threads)]
        for t in threads:
            t.start()

        results: list = [None] * count
        failures: dict[int, BaseException] = {}
        for _ in range(count):
            idx, ok, value = self._resp_queue.get()
            if ok:
                results[idx] = value
            else:
                failures[idx] = value
            bar.update()
        for t in threads:
            t.join()

        if failures:
            first = min(failures)
            logger.warning("TrialRunner: %d of %d trials failed, first at trial %d",
                           len(failures), count, first)
            raise failures[first]
        return results

    def _worker(self, fn):
        while True:
            idx = self._req_queue.get()
            if idx is None:
                break
            try:
                self._resp_queue.put((idx, True, fn(idx)))
            except Exception as exc:
                self._resp_queue.put((idx, False, exc))
