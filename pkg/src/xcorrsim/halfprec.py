"""Half-precision helpers shared by the spectrum model and the simulator."""

import numpy as np

# Decode table: uint16 bit pattern -> float32 value. Passed into jitted code
# as an argument so the compiled kernels stay small and cacheable.
HALF_TO_F32 = np.arange(65536, dtype=np.uint32).astype(np.uint16).view(np.float16).astype(np.float32)
HALF_TO_F32.setflags(write=False)

HALF_MAX = 65504.0


def to_half(values):
    """Round to the nearest half-precision value (ties to even).

    Goes through numpy's float64 -> float16 conversion, which rounds once.
    Raises OverflowError for anything that would become infinite.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("non-finite value cannot be stored as half precision")
    with np.errstate(over="ignore"):
        out = arr.astype(np.float16)
    if out.size and not np.all(np.isfinite(out)):
        raise OverflowError("value exceeds the half-precision range")
    return out


def half_bits(values):
    return np.asarray(values, dtype=np.float16).view(np.uint16)


def from_bits(bits):
    return np.asarray(bits, dtype=np.uint16).view(np.float16)
