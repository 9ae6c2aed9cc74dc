"""Binary category coding used across the outcome and mediator models.

Category 1 is always the "event" internally (index 0); category 2 is the
complement (index 1).  Inputs may arrive coded {1, 2} or {0, 1}; with
{0, 1} coding the value 1 maps to the event.
"""

from __future__ import annotations

import numpy as np

CODINGS = ("1,2", "0,1")


def encode_categories(values, coding: str = "1,2") -> np.ndarray:
    """Map coded categories to internal indices {0: event, 1: non-event}."""
    if coding not in CODINGS:
        raise ValueError(f"coding must be one of {CODINGS}, got {coding!r}")
    v = np.asarray(values)
    if v.ndim != 1:
        raise ValueError("category vector must be one-dimensional")
    vals = v.astype(float)
    if coding == "1,2":
        ok = np.isin(vals, (1.0, 2.0))
        idx = (vals == 2.0).astype(int)
    else:
        ok = np.isin(vals, (0.0, 1.0))
        idx = (vals == 0.0).astype(int)
    if not np.all(ok):
        bad = np.unique(vals[~ok])
        raise ValueError(f"values {bad} are not valid under coding {coding!r}")
    return idx


def indicator(idx: np.ndarray) -> np.ndarray:
    """Two-column indicator matrix from internal category indices."""
    n = idx.shape[0]
    out = np.zeros((n, 2))
    out[np.arange(n), idx] = 1.0
    return out
