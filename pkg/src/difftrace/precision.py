"""Floating-point width switch and shared numerical guard constants.

All rendering arithmetic runs in 32-bit by default; 64-bit can be enabled
globally for gradient-check diagnostics.
"""

import numpy as np

# Minimum valid ray parameter: rejects self-intersections in 32-bit.
T_MIN = 1e-4
# Offset applied along the normal to reflected-ray origins.
REFLECT_OFFSET = 1e-4
# Rays with a Moller-Trumbore determinant below this are treated as parallel.
DET_EPS = 1e-9
# normalize() returns the zero vector below this squared-length threshold.
NORM_EPS = 1e-12

_active_dtype = np.float32


def set_dtype(dtype) -> None:
    """Switch the global float width. Accepts 'float32'/'float64' or numpy dtypes."""
    global _active_dtype
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported float width: {dtype!r}")
    _active_dtype = dt.type


def active_dtype():
    """The numpy scalar type currently used for rendering arithmetic."""
    return _active_dtype


def dtype_name() -> str:
    return np.dtype(_active_dtype).name


def default_fd_delta() -> float:
    """Default central-difference step for the active float width."""
    return 5e-3 if _active_dtype is np.float32 else 1e-6


def asarray(x):
    return np.asarray(x, dtype=_active_dtype)
