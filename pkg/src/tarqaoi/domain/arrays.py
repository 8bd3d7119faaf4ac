"""
Annotated numpy array types for pydantic models.

Arrays are coerced to read-only contiguous buffers so models stay immutable
after construction, and serialize as plain JSON lists.
"""
from __future__ import annotations

from typing import Annotated

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _readonly(dtype):
    def coerce(value) -> np.ndarray:
        arr = np.array(value, dtype=dtype, copy=True)
        if arr.ndim != 1:
            raise ValueError("expected a one-dimensional sequence")
        arr.setflags(write=False)
        return arr

    return coerce


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_readonly(np.float64)),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]

IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_readonly(np.int64)),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]
