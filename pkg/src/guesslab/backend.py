"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the pure
Python twin takes over.  Set ``GUESSLAB_BACKEND=python`` (or ``cython``)
to force one side, e.g. for the backend benchmark.
"""

from __future__ import annotations

import os

_requested = os.environ.get("GUESSLAB_BACKEND", "auto").lower()

if _requested in ("python", "py", "pure"):
    from . import _kernels_py as kernels
elif _requested in ("cython", "c", "compiled"):
    from . import _kernels as kernels  # type: ignore[no-redef]
elif _requested == "auto":
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]
else:
    raise RuntimeError(
        f"GUESSLAB_BACKEND={_requested!r} not recognized; "
        "use auto, python, or cython"
    )

BACKEND = kernels.BACKEND
