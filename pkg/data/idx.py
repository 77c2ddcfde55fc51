"""
idx.py - Parser for the IDX container used by MNIST and Fashion-MNIST.

Header: [magic:4B big-endian][dim_0:4B]...[dim_k:4B], then an unsigned byte
payload of prod(dims) entries. Only the two layouts the datasets use are
accepted: images (magic 0x803, 3 dims) and labels (magic 0x801, 1 dim).
"""

import gzip
import os
import struct

import numpy as np

from settings import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC

MAGIC_FMT = "!I"
DIM_FMT = "!I"

_NDIMS = {IDX_IMAGES_MAGIC: 3, IDX_LABELS_MAGIC: 1}


class FormatError(ValueError):
    """Bytes are not a well-formed IDX image or label file."""


class IoError(OSError):
    """A dataset file is missing or unreadable."""


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX blob into a uint8 array of shape dims.

    Raises FormatError on a bad magic, a short header or a payload whose
    length does not match the header; nothing is returned in that case.
    """
    if len(data) < 4:
        raise FormatError("missing IDX magic")
    (magic,) = struct.unpack_from(MAGIC_FMT, data, 0)
    ndim = _NDIMS.get(magic)
    if ndim is None:
        raise FormatError(f"bad IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise FormatError("truncated IDX header")
    dims = struct.unpack_from("!" + "I" * ndim, data, 4)
    count = int(np.prod(dims, dtype=np.int64))
    payload = len(data) - header
    if payload != count:
        raise FormatError(f"IDX payload has {payload} bytes, header announces {count}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims).copy()


def pack_idx(array: np.ndarray) -> bytes:
    """Inverse of parse_idx for uint8 image stacks (3-D) or label vectors (1-D)."""
    arr = np.asarray(array, dtype=np.uint8)
    magic = {3: IDX_IMAGES_MAGIC, 1: IDX_LABELS_MAGIC}.get(arr.ndim)
    if magic is None:
        raise FormatError(f"cannot pack a {arr.ndim}-D array as IDX")
    head = struct.pack(MAGIC_FMT, magic) + b"".join(struct.pack(DIM_FMT, d) for d in arr.shape)
    return head + arr.tobytes()


def read_idx(path: str) -> np.ndarray:
    """Read `path`, or `path.gz` when only the compressed file exists."""
    candidates = [path] if path.endswith(".gz") else [path, path + ".gz"]
    for candidate in candidates:
        if os.path.exists(candidate):
            try:
                opener = gzip.open if candidate.endswith(".gz") else open
                with opener(candidate, "rb") as f:
                    return parse_idx(f.read())
            except (OSError, EOFError) as e:
                raise IoError(f"cannot read {candidate}: {e}") from e
    raise IoError(f"missing IDX file {path}")
