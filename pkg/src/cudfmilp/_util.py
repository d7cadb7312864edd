from __future__ import annotations

import gc
from contextlib import contextmanager
from functools import wraps


@contextmanager
def gc_paused():
    """Suspend the cyclic collector while building large acyclic structures."""
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def without_gc(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        with gc_paused():
            return fn(*args, **kwargs)

    return wrapper
