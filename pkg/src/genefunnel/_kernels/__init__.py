"""Kernel backend selection.

The compiled Cython extension is preferred when present; otherwise the
numpy fallback is used. Set GENEFUNNEL_KERNELS=python or =compiled to
force a backend (the latter raises if the extension is missing).
"""
import os

_forced = os.environ.get("GENEFUNNEL_KERNELS", "").lower()

if _forced == "python":
    from . import _fallback as _impl
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        from . import _fallback as _impl
        BACKEND = "python"

best_split = _impl.best_split
knn_predict = _impl.knn_predict

__all__ = ["BACKEND", "best_split", "knn_predict"]
