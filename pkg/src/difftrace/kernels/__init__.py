"""Hit-finding backend selection.

The compiled Cython kernels are preferred when importable; the numpy
fallback is always available.  Override with DIFFTRACE_BACKEND=python or
=compiled, or programmatically via set_backend().
"""

from __future__ import annotations

import os

from . import numpy_backend

try:
    from . import _compiled
    HAVE_COMPILED = True
except ImportError:  # extension not built on this install
    _compiled = None
    HAVE_COMPILED = False

_BACKENDS = {"python": numpy_backend}
if HAVE_COMPILED:
    _BACKENDS["compiled"] = _compiled


def _initial():
    env = os.environ.get("DIFFTRACE_BACKEND", "auto").lower()
    if env in _BACKENDS:
        return _BACKENDS[env]
    if env not in ("auto", ""):
        raise RuntimeError(
            f"DIFFTRACE_BACKEND={env!r} unavailable; "
            f"choices: {sorted(_BACKENDS)} or auto")
    return _BACKENDS.get("compiled", numpy_backend)


_active = _initial()


def get_backend(name: str | None = None):
    if name is None:
        return _active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise RuntimeError(f"unknown backend {name!r}; "
                           f"choices: {sorted(_BACKENDS)}")


def set_backend(name: str) -> None:
    global _active
    _active = get_backend(name)


def backend_name() -> str:
    return _active.NAME


def available_backends() -> list:
    return sorted(_BACKENDS)
