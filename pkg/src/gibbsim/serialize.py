"""JSON helpers: complex arrays travel as nested [re, im] pairs."""

from __future__ import annotations

import numpy as np


def complex_to_pairs(a) -> list:
    """Nested lists with each complex entry as [re, im]."""
    arr = np.asarray(a, dtype=complex)
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def pairs_to_complex(pairs) -> np.ndarray:
    """Inverse of complex_to_pairs."""
    arr = np.asarray(pairs, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("expected trailing [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
