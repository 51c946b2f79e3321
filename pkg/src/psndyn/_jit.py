"""JIT switch shared by every hot kernel.

Set ``PSNDYN_DISABLE_JIT=1`` before import to run the kernels as plain
Python over numpy arrays. Results are bit-identical either way; only speed
differs.
"""

import os

DISABLED = os.environ.get("PSNDYN_DISABLE_JIT", "0").lower() in ("1", "true", "yes")

if DISABLED:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn

else:
    from numba import njit as _numba_njit

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        if len(args) == 1 and callable(args[0]):
            return _numba_njit(**kwargs)(args[0])
        return _numba_njit(*args, **kwargs)


def backend() -> str:
    return "python" if DISABLED else "numba"
