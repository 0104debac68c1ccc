"""Kernel backend selection.

At import the compiled ``_kernels`` extension is used when it was built;
otherwise the numpy fallback.  ``EBEN_BACKEND=python`` forces the fallback,
``EBEN_BACKEND=compiled`` makes a missing extension an ImportError.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

_requested = os.environ.get("EBEN_BACKEND", "auto").lower()
if _requested not in ("auto", "compiled", "python"):
    raise ImportError(f"EBEN_BACKEND must be auto, compiled or python, got {_requested!r}")

_compiled: ModuleType | None
try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    if _requested == "compiled":
        raise
    _compiled = None

_active: ModuleType = _fallback if (_requested == "python" or _compiled is None) else _compiled


def name() -> str:
    return "compiled" if _active is _compiled else "python"


def available() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get(which: str | None = None) -> ModuleType:
    """Kernel module by name; ``None`` returns the active one."""
    if which is None:
        return _active
    if which == "python":
        return _fallback
    if which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {which!r}")


def use(which: str) -> None:
    """Switch the process-wide backend (benchmarks and tests)."""
    global _active
    _active = get(which)


def conv1d(x, w, bias, stride=1, dilation=1, pad_left=0, pad_right=0, groups=1):
    return _active.conv1d(x, w, bias, stride, dilation, pad_left, pad_right, groups)


def conv_transpose1d(x, w, bias, stride, crop_left, out_len):
    return _active.conv_transpose1d(x, w, bias, stride, crop_left, out_len)


def biquad_filter(b, a, x, zi):
    return _active.biquad_filter(b, a, x, zi)
