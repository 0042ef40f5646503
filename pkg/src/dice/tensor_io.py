"""Binary tensor exchange (DTF1) and the in-memory FeatureMatrix.

DTF1 layout, bit-exact:
    bytes 0-3   magic "DTF1"
    byte  4     dtype code (0 = IEEE-754 binary32)
    byte  5     ndim, 2 or 3
    next 8*ndim dims as unsigned 64-bit little-endian
    rest        payload, f32 little-endian, row-major

No compression, no memory mapping, no dtype conversion.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"DTF1"
DTYPE_F32 = 0


@dataclass
class FeatureMatrix:
    """N x D matrix of token/patch features.

    Rows are tokens (patches), columns are channels. Covariance-stage
    operations additionally require N >= 2 and D >= 2; construction only
    requires finite entries so that single-token matrices (attention with
    N = 1, single-patch reshapes) remain representable.
    """

    data: np.ndarray
    tag: str = ""

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValidationError(f"FeatureMatrix needs a 2-axis array, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"FeatureMatrix shape {arr.shape} has an empty axis")
        if not np.isfinite(arr).all():
            raise ValidationError("FeatureMatrix entries must be finite")
        self.data = arr

    @property
    def n_tokens(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def require_covariance_ready(fm: FeatureMatrix) -> None:
    # N-1 divisor and cross-covariance need at least 2 tokens and 2 channels
    if fm.n_tokens < 2 or fm.dim < 2:
        raise ValidationError(
            f"covariance stage needs N >= 2 and D >= 2, got {fm.n_tokens} x {fm.dim}"
        )


def _atomic_write_bytes(path: str | os.PathLike, blob: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".dtf-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as e:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise FormatError(f"{path}: write failed: {e}") from e


def write_tensor(t, path: str | os.PathLike) -> None:
    """Serialize a FeatureMatrix, 2-axis, or 3-axis array as DTF1."""
    if isinstance(t, FeatureMatrix):
        arr = t.data
    else:
        arr = np.asarray(t)
    if arr.ndim not in (2, 3):
        raise ValidationError(f"DTF1 stores 2- or 3-axis tensors, got ndim={arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise ValidationError(f"DTF1 dims must be >= 1, got {arr.shape}")
    with np.errstate(over="ignore"):
        # overflow to inf is caught by the finiteness check below
        payload = np.ascontiguousarray(arr, dtype="<f4")
    if not np.isfinite(payload).all():
        raise ValidationError("tensor entries must be finite in 32-bit range")
    header = MAGIC + bytes([DTYPE_F32, arr.ndim])
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    _atomic_write_bytes(path, header + payload.tobytes(order="C"))


def read_tensor(path: str | os.PathLike):
    """Parse a DTF1 file.

    Returns a FeatureMatrix for 2-axis files and a plain (C, H, W) ndarray
    for 3-axis files. Values are exactly the stored f32 bits.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise FormatError(f"{path}: cannot read: {e}") from e

    if len(blob) < 6:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    dtype_code, ndim = blob[4], blob[5]
    if dtype_code != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype_code}")
    if ndim not in (2, 3):
        raise FormatError(f"{path}: ndim must be 2 or 3, got {ndim}")
    hdr_len = 6 + 8 * ndim
    if len(blob) < hdr_len:
        raise FormatError(f"{path}: truncated dims block")
    dims = struct.unpack(f"<{ndim}Q", blob[6:hdr_len])
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: zero dim in {dims}")
    n_values = 1
    for d in dims:
        n_values *= d
    expected = hdr_len + 4 * n_values
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload length {len(blob) - hdr_len} bytes, expected {4 * n_values}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=hdr_len).reshape(dims).copy()
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: non-finite entries in payload")
    if ndim == 2:
        return FeatureMatrix(data)
    return data


def reshape_to_patches(fmap: np.ndarray, tag: str = "") -> FeatureMatrix:
    """(C, H, W) feature map -> (H*W) x C patch matrix.

    Row i holds the channel vector of spatial location (i // W, i mod W).
    """
    fmap = np.asarray(fmap)
    if fmap.ndim != 3:
        raise ValidationError(f"feature map must be 3-axis (C,H,W), got ndim={fmap.ndim}")
    c, h, w = fmap.shape
    if min(c, h, w) < 1:
        raise ValidationError(f"feature map dims must be >= 1, got {fmap.shape}")
    mat = np.ascontiguousarray(fmap.reshape(c, h * w).T)
    return FeatureMatrix(mat, tag=tag)


def patches_to_map(fm: FeatureMatrix, h: int, w: int) -> np.ndarray:
    """Inverse of reshape_to_patches for an H*W-row matrix."""
    if fm.n_tokens != h * w:
        raise ValidationError(f"{fm.n_tokens} rows cannot fill a {h}x{w} grid")
    return np.ascontiguousarray(fm.data.T.reshape(fm.dim, h, w))
