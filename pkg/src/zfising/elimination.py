"""Backend selection for the block elimination kernel.

The compiled extension is used when it was built, otherwise the pure-Python
module with the same interface.  :func:`use_backend` switches explicitly (the
benchmark and the cross-check tests rely on it).
"""

from __future__ import annotations

from types import ModuleType

from . import _elim_py

try:
    from . import _elim as _compiled  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _compiled = None

_kernel: ModuleType = _compiled if _compiled is not None else _elim_py
BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def use_backend(name: str) -> str:
    """Select ``"compiled"`` or ``"python"``; returns the previous choice."""
    global _kernel, BACKEND
    if name not in available_backends():
        raise ValueError(f"backend {name!r} is not available")
    prev = BACKEND
    _kernel = _compiled if name == "compiled" else _elim_py
    BACKEND = name
    return prev


def symbolic(npairs, ntail, colptr, rowidx):
    return _kernel.symbolic(npairs, ntail, colptr, rowidx)


def factor(npairs, ntail, colptr, rowidx, vals, diag, pivot_rtol):
    return _kernel.factor(npairs, ntail, colptr, rowidx, vals, diag, pivot_rtol)
