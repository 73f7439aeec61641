"""3D volume I/O: a bit-exact NIfTI-1 subset plus 2D slice stacking.

Arrays throughout the package are indexed ``[x, y, z]`` (``[x, y]`` for 2D
slices) with x the fastest-varying axis on disk, matching the NIfTI voxel
payload ordering. Voxel spacing is millimetres per voxel.

The NIfTI subset is deliberately narrow: single-file ``.nii``, 348-byte
header, datatypes u8/i16/u16/f32, no gzip, no sform/qform handling.
Spacing comes from ``pixdim`` alone; both endiannesses are readable and
files are written in host order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptHeader,
    EmptyDirectory,
    InconsistentDimensions,
    InvariantViolation,
    IoFailure,
    TruncatedData,
    UnreadableImage,
    UnsupportedFormat,
)

HEADER_SIZE = 348
MIN_VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"

# NIfTI-1 datatype code -> numpy dtype (the supported subset)
_CODE_TO_DTYPE = {2: np.uint8, 4: np.int16, 16: np.float32, 512: np.uint16}
_DTYPE_TO_CODE = {np.dtype(np.uint8): 2, np.dtype(np.int16): 4,
                  np.dtype(np.float32): 16, np.dtype(np.uint16): 512}
_DTYPE_TAGS = {np.dtype(np.uint8): "u8", np.dtype(np.int16): "i16",
               np.dtype(np.float32): "f32", np.dtype(np.uint16): "u16"}

_SLICE_EXTENSIONS = {".png", ".pgm"}


def _as_float3(values) -> tuple[float, float, float]:
    a, b, c = values
    return (float(a), float(b), float(c))


@dataclass(frozen=True)
class Volume:
    """A 3D scalar image with voxel spacing in mm.

    ``data`` has shape ``(nx, ny, nz)``; dtype must be one of
    u8/i16/u16/f32. Instances are immutable value objects.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise InvariantViolation(f"volume data must be 3D, got {data.ndim}D")
        if data.dtype not in _DTYPE_TAGS:
            raise InvariantViolation(f"unsupported volume dtype {data.dtype}")
        if any(d < 1 for d in data.shape):
            raise InvariantViolation(f"volume dims must be positive, got {data.shape}")
        spacing = _as_float3(self.spacing)
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise InvariantViolation(f"spacing must be finite and > 0, got {spacing}")
        if np.issubdtype(data.dtype, np.floating) and np.isnan(data).any():
            raise InvariantViolation("volume contains NaN values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def dtype_tag(self) -> str:
        return _DTYPE_TAGS[self.data.dtype]

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass(frozen=True)
class MaskVolume:
    """A binary 3D mask: 0 = background, 1 = foreground."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.ndim != 3:
            raise InvariantViolation(f"mask data must be 3D, got {data.ndim}D")
        if data.max(initial=0) > 1:
            raise InvariantViolation("mask values must be 0 or 1")
        spacing = _as_float3(self.spacing)
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise InvariantViolation(f"spacing must be finite and > 0, got {spacing}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def foreground_count(self) -> int:
        return int(self.data.sum())


def binarize_volume(volume: Volume, threshold: float | None = None) -> MaskVolume:
    """Turn a scalar volume into a mask: value > threshold -> 1.

    ``threshold=None`` uses half the volume's maximum value, which accepts
    both {0,1} and {0,255} mask encodings.
    """
    data = volume.data
    if threshold is None:
        threshold = float(data.max()) / 2.0
    return MaskVolume((data > threshold).astype(np.uint8), volume.spacing)


def mask_to_volume(mask: MaskVolume) -> Volume:
    """View a mask as a u8 Volume (for writing to NIfTI)."""
    return Volume(mask.data.astype(np.uint8), mask.spacing)


def read_nifti(path) -> Volume:
    """Read a single-file NIfTI-1 volume from the supported subset.

    Accepts both endiannesses; applies scl_slope/scl_inter when set.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"\x1f\x8b":
        raise UnsupportedFormat(f"{path}: gzip-compressed NIfTI is not supported")
    if len(raw) < HEADER_SIZE:
        raise CorruptHeader(f"{path}: file shorter than the {HEADER_SIZE}-byte header")

    if struct.unpack_from("<i", raw, 0)[0] == HEADER_SIZE:
        order = "<"
    elif struct.unpack_from(">i", raw, 0)[0] == HEADER_SIZE:
        order = ">"
    else:
        raise UnsupportedFormat(f"{path}: sizeof_hdr is not {HEADER_SIZE} in either byte order")

    magic = raw[344:348]
    if magic != MAGIC_SINGLE:
        raise UnsupportedFormat(f"{path}: magic {magic!r} is not 'n+1\\0'")

    dim = struct.unpack_from(f"{order}8h", raw, 40)
    if dim[0] != 3:
        raise UnsupportedFormat(f"{path}: dim[0] == {dim[0]}, only 3D volumes are supported")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if nx < 1 or ny < 1 or nz < 1:
        raise CorruptHeader(f"{path}: nonpositive dims {(nx, ny, nz)}")

    datatype = struct.unpack_from(f"{order}h", raw, 70)[0]
    if datatype not in _CODE_TO_DTYPE:
        raise UnsupportedFormat(f"{path}: datatype code {datatype} outside supported subset")
    dtype = np.dtype(_CODE_TO_DTYPE[datatype])

    pixdim = struct.unpack_from(f"{order}8f", raw, 76)
    spacing = (pixdim[1], pixdim[2], pixdim[3])
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise CorruptHeader(f"{path}: pixdim spacing {spacing} not finite and positive")

    vox_offset = struct.unpack_from(f"{order}f", raw, 108)[0]
    if not np.isfinite(vox_offset) or vox_offset < MIN_VOX_OFFSET:
        raise CorruptHeader(f"{path}: vox_offset {vox_offset} < {MIN_VOX_OFFSET}")
    vox_offset = int(vox_offset)

    scl_slope, scl_inter = struct.unpack_from(f"{order}2f", raw, 112)

    count = nx * ny * nz
    payload = count * dtype.itemsize
    if len(raw) < vox_offset + payload:
        raise TruncatedData(
            f"{path}: expected {vox_offset + payload} bytes, file has {len(raw)}"
        )

    disk_dtype = dtype.newbyteorder(order)
    flat = np.frombuffer(raw, dtype=disk_dtype, count=count, offset=vox_offset)
    data = flat.astype(dtype).reshape((nx, ny, nz), order="F")

    if scl_slope != 0.0 and (scl_slope != 1.0 or scl_inter != 0.0):
        data = (data.astype(np.float64) * scl_slope + scl_inter).astype(np.float32)

    return Volume(data, spacing)


def write_nifti(volume: Volume, path) -> None:
    """Write a Volume as single-file NIfTI-1 in host byte order.

    vox_offset is 352, scl_slope 1, scl_inter 0; read_nifti(write_nifti(v))
    reproduces v bit-exactly.
    """
    path = Path(path)
    data = volume.data
    nx, ny, nz = volume.dims
    code = _DTYPE_TO_CODE[data.dtype]

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i" if np.little_endian else ">i", header, 0, HEADER_SIZE)
    order = "<" if np.little_endian else ">"
    struct.pack_into(f"{order}c", header, 38, b"r")
    struct.pack_into(f"{order}8h", header, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into(f"{order}h", header, 70, code)
    struct.pack_into(f"{order}h", header, 72, data.dtype.itemsize * 8)
    sx, sy, sz = volume.spacing
    struct.pack_into(f"{order}8f", header, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into(f"{order}f", header, 108, float(MIN_VOX_OFFSET))
    struct.pack_into(f"{order}2f", header, 112, 1.0, 0.0)
    struct.pack_into(f"{order}B", header, 123, 2)  # xyzt_units: millimetres
    header[344:348] = MAGIC_SINGLE

    payload = np.asfortranarray(data).tobytes(order="F")
    try:
        with open(path, "wb") as fh:
            fh.write(bytes(header))
            fh.write(b"\x00\x00\x00\x00")  # header extension flag, pads to vox_offset
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_grayscale(path) -> np.ndarray:
    """Load a 2D grayscale image as an ``[x, y]``-indexed array."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "I", "I;16", "F"):
                raise UnreadableImage(f"{path}: mode {img.mode} is not grayscale")
            arr = np.array(img)
    except (UnidentifiedImageError, OSError) as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc
    if arr.ndim != 2:
        raise UnreadableImage(f"{path}: expected a single-channel image")
    return arr.T


def save_mask_png(mask2d: np.ndarray, path) -> None:
    """Save an ``[x, y]`` binary mask as an 8-bit PNG with values 0/255."""
    out = (np.asarray(mask2d).T > 0).astype(np.uint8) * 255
    Image.fromarray(out).save(Path(path))


def stack_slices(directory, spacing=(1.0, 1.0, 1.0), threshold: float | None = None) -> MaskVolume:
    """Assemble a 3D mask from a directory of 2D grayscale slice images.

    Filenames sort lexicographically into slice order; slice k becomes the
    plane z = k. Pixels strictly greater than ``threshold`` become
    foreground. ``threshold=None`` uses half the maximum pixel value
    across the stack.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyDirectory(f"{directory} is not a directory")
    names = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in _SLICE_EXTENSIONS
    )
    if not names:
        raise EmptyDirectory(f"no slice images found in {directory}")

    slices = []
    for name in names:
        arr = load_grayscale(name)
        if slices and arr.shape != slices[0].shape:
            raise InconsistentDimensions(
                f"{name}: slice is {arr.shape}, expected {slices[0].shape}"
            )
        slices.append(arr)

    stack = np.stack(slices, axis=2)
    if threshold is None:
        threshold = float(stack.max()) / 2.0
    return MaskVolume((stack > threshold).astype(np.uint8), spacing)
