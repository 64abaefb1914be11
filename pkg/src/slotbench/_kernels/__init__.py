"""Rasterizer kernel dispatch: compiled Cython core if built, NumPy otherwise.

Both backends are bit-identical by construction; ``BACKEND`` records which
one is active so benchmarks and logs can report it.
"""
from . import fallback

try:
    from . import _rasterize as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build
    _impl = fallback
    BACKEND = "numpy"

entity_id_buffer = _impl.entity_id_buffer
entity_id_buffer_fallback = fallback.entity_id_buffer

__all__ = ["entity_id_buffer", "entity_id_buffer_fallback", "BACKEND"]
