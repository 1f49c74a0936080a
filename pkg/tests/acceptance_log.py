"""Shared PASS/FAIL record for the acceptance suite."""

import contextlib
import time

RESULTS = {}


@contextlib.contextmanager
def criterion(num, title):
    start = time.perf_counter()
    info = {}
    try:
        yield info
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        RESULTS[num] = f"criterion {num:2d} FAIL  {title}: {msg}"
        print(RESULTS[num])
        raise
    took = time.perf_counter() - start
    detail = ", ".join(f"{k}={v}" for k, v in info.items())
    RESULTS[num] = f"criterion {num:2d} PASS  {title} ({detail}; {took:.1f}s)"
    print(RESULTS[num])
