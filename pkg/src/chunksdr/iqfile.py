"""IQ sample file formats.

``cf32``: interleaved 32-bit float I,Q, little-endian.
``sc8``: interleaved signed 8-bit I,Q (same quantization as the packetizer).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FULL_SCALE_INT8 = 127


def write_cf32(path: str | Path, samples: np.ndarray) -> None:
    np.asarray(samples, dtype=np.complex64).astype("<c8").tofile(path)


def read_cf32(path: str | Path) -> np.ndarray:
    return np.fromfile(path, dtype="<c8").astype(np.complex64)


def quantize_int8(samples: np.ndarray, full_scale: float = 1.0) -> np.ndarray:
    """Symmetric clip at +-127 (-128 unused) so negation is exact."""
    x = np.asarray(samples, dtype=np.complex64) * (FULL_SCALE_INT8 / full_scale)
    out = np.empty(x.size * 2, dtype=np.int8)
    out[0::2] = np.clip(np.round(x.real), -FULL_SCALE_INT8, FULL_SCALE_INT8)
    out[1::2] = np.clip(np.round(x.imag), -FULL_SCALE_INT8, FULL_SCALE_INT8)
    return out


def dequantize_int8(raw: np.ndarray | bytes, full_scale: float = 1.0) -> np.ndarray:
    data = np.frombuffer(raw, dtype=np.int8) if isinstance(raw, bytes) else np.asarray(raw, dtype=np.int8)
    scale = full_scale / FULL_SCALE_INT8
    return ((data[0::2].astype(np.float32) + 1j * data[1::2].astype(np.float32)) * scale).astype(
        np.complex64
    )


def write_sc8(path: str | Path, samples: np.ndarray, full_scale: float = 1.0) -> None:
    quantize_int8(samples, full_scale).tofile(path)


def read_sc8(path: str | Path, full_scale: float = 1.0) -> np.ndarray:
    return dequantize_int8(np.fromfile(path, dtype=np.int8), full_scale)
