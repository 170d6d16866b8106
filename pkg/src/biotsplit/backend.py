"""Kernel backend selection.

The compiled Cython kernels are preferred when present; the numpy
implementations are a drop-in replacement.  Set BIOTSPLIT_BACKEND to
"compiled" or "numpy" to force a choice ("compiled" fails loudly if the
extension is missing, which keeps CI honest).
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCED = os.environ.get("BIOTSPLIT_BACKEND", "").strip().lower()

if _FORCED not in ("", "compiled", "numpy"):
    raise ImportError(
        f"BIOTSPLIT_BACKEND={_FORCED!r} not recognized; "
        "use 'compiled' or 'numpy'")

if _FORCED == "numpy":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _FORCED == "compiled":
            raise
        kernels = _kernels_py

backend_name: str = kernels.BACKEND_KIND


def available_backends():
    """Names of the kernel backends importable in this installation."""
    names = ["numpy"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names
