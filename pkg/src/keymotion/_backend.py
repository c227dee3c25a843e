"""Kernel backend selection.

The compiled extension (``keymotion._kernels``) is preferred when importable;
otherwise the pure-numpy fallback (``keymotion._kernels_py``) is used. Set
KEYMOTION_BACKEND=pure or =compiled to force one; forcing "compiled" raises
if the extension was not built.
"""

from __future__ import annotations

import os

_ENV_VAR = "KEYMOTION_BACKEND"


def get_kernels(name: str | None = None):
    """Return a kernels module: "compiled", "pure", or None for the default."""
    if name is None:
        name = os.environ.get(_ENV_VAR, "").strip().lower() or None
    if name == "pure":
        from . import _kernels_py
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    if name is not None:
        raise ValueError(f"unknown kernel backend {name!r}; use 'compiled' or 'pure'")
    try:
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    except ImportError:
        from . import _kernels_py
        return _kernels_py


kernels = get_kernels()
HAS_COMPILED_KERNELS = bool(getattr(kernels, "COMPILED", False))
