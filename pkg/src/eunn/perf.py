"""Process-level tuning for long training runs."""

import ctypes
import ctypes.util
import logging

log = logging.getLogger(__name__)

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


def tune_allocator(threshold=256 << 20):
    """Keep mid-sized numpy temporaries on the glibc heap instead of fresh mmaps.

    The recurrence allocates many short-lived 100 kB - 1 MB arrays per step;
    by default glibc serves each from a new mapping and pays the page faults
    every time. Returns False (and does nothing) off glibc.
    """
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        ok = libc.mallopt(_M_MMAP_THRESHOLD, threshold) and libc.mallopt(_M_TRIM_THRESHOLD, threshold)
    except (OSError, AttributeError):
        return False
    if not ok:
        log.debug("mallopt refused allocator settings")
    return bool(ok)
