"""Sweep-kernel selection.

Prefers the compiled extension; falls back to the pure-numpy loop when the
extension was not built or fails to import. ``MASLOV_BACKEND=python`` forces
the fallback (useful for benchmarking and for debugging the compiled path).
"""

from __future__ import annotations

import os

from . import _kernel_py

_forced = os.environ.get("MASLOV_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        if _forced in ("compiled", "c"):
            raise
        _impl = _kernel_py

BACKEND_NAME: str = _impl.BACKEND_NAME
run_sweep_chunk = _impl.run_sweep_chunk


def available_backends() -> dict[str, object]:
    """Name -> module for every importable kernel implementation."""
    impls: dict[str, object] = {_kernel_py.BACKEND_NAME: _kernel_py}
    try:
        from . import _kernel  # noqa: PLC0415

        impls[_kernel.BACKEND_NAME] = _kernel
    except ImportError:
        pass
    return impls
