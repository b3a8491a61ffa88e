"""Backend selection for the hot loops.

The compiled extension ``_core`` is used when it imports; otherwise, or when
the environment variable ``TOPOCRIT_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy/pure-Python versions in ``_fallback`` are used.
"""

from __future__ import annotations

import os

from . import _fallback

_force_python = os.environ.get("TOPOCRIT_PURE_PYTHON", "") not in ("", "0")

_core = None
if not _force_python:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build
        _core = None

BACKEND = "compiled" if _core is not None else "python"
_impl = _core if _core is not None else _fallback

xor_matvec = _impl.xor_matvec
symmetric_representatives = _impl.symmetric_representatives
symmetric_neighbors = _impl.symmetric_neighbors
symmetric_matvec = _impl.symmetric_matvec
symmetric_flip_expectation = _impl.symmetric_flip_expectation
qmc_simulate = _impl.qmc_simulate

RNG_NAME = _fallback.SplitMix64.name


def backend(name: str):
    """Module implementing the kernels for ``name`` in {'compiled', 'python'}."""
    if name == "python":
        return _fallback
    if name == "compiled":
        if _core is None:
            raise ImportError("compiled kernels are not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _core is not None
