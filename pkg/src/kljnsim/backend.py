"""Kernel backend selection: compiled extension if built, numpy fallback otherwise.

Set KLJNSIM_BACKEND=python to force the fallback (e.g. for benchmarking), or
KLJNSIM_BACKEND=compiled to fail loudly when the extension is missing.
"""
from __future__ import annotations

import os

import numpy as np

from . import _recurrence_py

try:
    from . import _recurrence as _compiled
except ImportError:
    _compiled = None

_CHOICE = os.environ.get("KLJNSIM_BACKEND", "auto").lower()
if _CHOICE == "compiled" and _compiled is None:
    raise ImportError(
        "KLJNSIM_BACKEND=compiled but the kljnsim._recurrence extension is not "
        "built; run `pip install -e . --no-build-isolation`"
    )
if _CHOICE not in ("auto", "compiled", "python"):
    raise ImportError(f"unknown KLJNSIM_BACKEND value: {_CHOICE!r}")

_impl = _compiled if (_compiled is not None and _CHOICE != "python") else _recurrence_py


def active_backend() -> str:
    """Name of the kernel implementation in use: 'compiled' or 'python'."""
    return "compiled" if _impl is _compiled and _compiled is not None else "python"


def compiled_available() -> bool:
    return _compiled is not None


def ladder_scan(p: np.ndarray, qu: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Run the state recurrence x[k] = p @ x[k-1] + qu[k-1] over a whole segment.

    Returns the full time-major state trajectory, shape (t, m) where
    t = qu.shape[0] + 1 and trajectory[0] = x0.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    qu = np.ascontiguousarray(qu, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    out = np.empty((qu.shape[0] + 1, p.shape[0]))
    _impl.recurrence_scan(p, qu, x0, out)
    return out


def scan_with(impl_name: str, p, qu, x0) -> np.ndarray:
    """Run the scan on an explicit backend ('compiled' or 'python').

    Used by the benchmark and the backend-equivalence tests.
    """
    if impl_name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not built")
        impl = _compiled
    elif impl_name == "python":
        impl = _recurrence_py
    else:
        raise ValueError(f"unknown backend {impl_name!r}")
    p = np.ascontiguousarray(p, dtype=np.float64)
    qu = np.ascontiguousarray(qu, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    out = np.empty((qu.shape[0] + 1, p.shape[0]))
    impl.recurrence_scan(p, qu, x0, out)
    return out
