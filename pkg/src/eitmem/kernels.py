"""Kernel backend selection: compiled extension if built, numpy fallback otherwise."""

from __future__ import annotations

try:
    from . import _kernels as _impl
except ImportError:  # extension not built
    from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME
rk4_envelope_segment = _impl.rk4_envelope_segment


def load_backends() -> dict:
    """All importable kernel backends, keyed by name (for tests and benchmarks)."""
    from . import _kernels_py

    backends = {_kernels_py.BACKEND_NAME: _kernels_py}
    try:
        from . import _kernels

        backends[_kernels.BACKEND_NAME] = _kernels
    except ImportError:
        pass
    return backends
