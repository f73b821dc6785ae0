"""Kernel backend selection.

The compiled extension is used when it imports; ``FACEGROWTH_PURE_PYTHON=1``
forces the numpy fallback. Both give identical results.
"""
from __future__ import annotations

import os

if os.environ.get("FACEGROWTH_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

BACKEND: str = kernels.BACKEND


def load(name: str):
    """Explicitly load one backend ("compiled" or "python")."""
    if name == "python":
        from . import _kernels_py
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
