"""Hot loops behind a backend switch.

The compiled extension is used when it was built; otherwise the numpy / pure
Python reference implementation takes over. Set ``CHAINED_BELL_BACKEND=python``
to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def _select(name: str | None):
    if name is None:
        name = os.environ.get("CHAINED_BELL_BACKEND", "").strip().lower() or None
    if name is None:
        return ("cython", _ckernels) if _ckernels is not None else ("python", _pykernels)
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return name, BACKENDS[name]


BACKEND, _impl = _select(None)


def _module(backend: str | None):
    return _impl if backend is None else _select(backend)[1]


def lhv_block(raw, first_trial, n, p, q, time_unit, spacing, two_pi, width, uniform,
              a_table, b_table, backend: str | None = None):
    """Evaluate the gated-staircase model on a block of raw Philox words (shape ``(m, 4)``).

    Returns ``(a_set, b_set, a_out, b_out, a_time, b_time)``.
    """
    m = raw.shape[0]
    out = (
        np.empty(m, np.int64), np.empty(m, np.int64),
        np.empty(m, np.int8), np.empty(m, np.int8),
        np.empty(m, np.float64), np.empty(m, np.float64),
    )
    _module(backend).lhv_block(
        np.ascontiguousarray(raw, dtype=np.uint64), int(first_trial), int(n), float(p), float(q),
        float(time_unit), float(spacing), float(two_pi), float(width), bool(uniform),
        np.ascontiguousarray(a_table, dtype=np.int64), np.ascontiguousarray(b_table, dtype=np.int64),
        *out,
    )
    return out


def match_stream(a, b, dt: float, backend: str | None = None):
    """Index arrays ``(ai, bi)`` of matched events in two sorted timestamp streams."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cap = min(a.size, b.size)
    ai = np.empty(cap, np.int64)
    bi = np.empty(cap, np.int64)
    k = _module(backend).match_stream(a, b, float(dt), ai, bi)
    return ai[:k], bi[:k]
