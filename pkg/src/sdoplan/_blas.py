"""Process-wide BLAS thread pinning.

The solver's hot operations are small dense matvecs and rank-1 updates;
multithreaded BLAS adds pool-synchronization overhead that dwarfs the
arithmetic at these sizes (observed >10x slowdowns).  The first solve pins
BLAS pools to ``SDOPLAN_BLAS_THREADS`` (default 1).  Set it to 0 to leave
the pools alone.
"""

import os

_done = False


def pin_blas_threads():
    global _done
    if _done:
        return
    _done = True
    want = os.environ.get("SDOPLAN_BLAS_THREADS", "1")
    try:
        n = int(want)
    except ValueError:
        n = 1
    if n <= 0:
        return
    try:
        from threadpoolctl import ThreadpoolController
        ThreadpoolController().limit(limits=n, user_api="blas")
    except Exception:
        pass  # best effort; correctness never depends on this
