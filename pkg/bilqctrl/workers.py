"""
Sweep Workers
-------------
Run independent sweep cells (n values, eta values, random trials) on a small
thread pool and return results in cell order, whatever order they finish in.
The pool size comes from BILQCTRL_THREADS (default 1, i.e. inline).
"""
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import structlog
from tqdm import tqdm

from .exceptions import ValidationError

logger = structlog.get_logger(__name__)

THREADS_ENV = "BILQCTRL_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def thread_count(default: int = 1) -> int:
    """Worker threads allowed by BILQCTRL_THREADS."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        count = int(raw)
    except ValueError as e:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got '{raw}'") from e
    if count < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {count}")
    return count


def run_ordered(func: Callable[[T], R], jobs: Sequence[T], threads: Optional[int] = None,
                desc: str = "sweep", show_progress: bool = True) -> List[R]:
    """
    Apply func to every job and return the results in job order.

    Args:
        func: Pure function of one job
        jobs: Sweep cells
        threads: Pool size; defaults to thread_count()
        desc: Progress bar label
        show_progress: Show a tqdm bar when stderr is a terminal

    Returns:
        List[R]: func(jobs[i]) at index i
    """
    jobs = list(jobs)
    threads = thread_count() if threads is None else threads
    disable = not show_progress or not sys.stderr.isatty()
    logger.debug("sweep_start", desc=desc, jobs=len(jobs), threads=threads)

    if threads <= 1 or len(jobs) <= 1:
        return [func(job) for job in tqdm(jobs, desc=desc, disable=disable)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves submission order
        return list(tqdm(pool.map(func, jobs), total=len(jobs), desc=desc, disable=disable))
