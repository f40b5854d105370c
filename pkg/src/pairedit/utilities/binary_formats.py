"""Binary checkpoint and correspondence formats.

Checkpoint: magic ``FPCK``, u32 version, then per tensor until the end of the file a u32 name length,
the UTF-8 name, u32 ndim, u32 dims and the float32 payload in row-major order.
Correspondence: magic ``FPCR``, u32 N, then N records of (u32 source token or 0xFFFFFFFF, u8 visible).
All integers and floats are little-endian.
"""
import logging
import os
import struct
from collections.abc import Mapping

import numpy as np

from pairedit.interfaces.sample_pair import NO_SOURCE, Correspondence
from pairedit.utilities.atomic import atomic_write

log = logging.getLogger("Ckpt")

CHECKPOINT_MAGIC = b"FPCK"
CHECKPOINT_VERSION = 1
CORRESPONDENCE_MAGIC = b"FPCR"
NO_SOURCE_U32 = 0xFFFFFFFF

_CORRESPONDENCE_RECORD = np.dtype([("source", "<u4"), ("visible", "u1")])


class FormatError(ValueError):
    """Binary file with invalid magic, version or truncated content."""


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise FormatError(f"{self.path}: truncated at byte {self.offset}")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def save_checkpoint(path: str | os.PathLike, tensors: Mapping[str, np.ndarray]) -> None:
    """Write named tensors as float32 checkpoint.

    Parameters
    ----------
    path
        Destination file, written atomically
    tensors
        Named arrays, written in mapping order
    """
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        values = np.ascontiguousarray(array, dtype="<f4")
        chunks.append(struct.pack("<I", len(encoded)) + encoded)
        chunks.append(struct.pack(f"<I{values.ndim}I", values.ndim, *values.shape))
        chunks.append(values.tobytes(order="C"))
    with atomic_write(path) as file:
        file.write(b"".join(chunks))
    log.info("Saved %d tensors to %s", len(tensors), path)


def load_checkpoint(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Read a checkpoint.

    Returns
    -------
        Named float32 arrays in file order

    Raises
    ------
    FileNotFoundError
        File does not exist.
    FormatError
        Wrong magic, unsupported version, duplicate names or truncated content.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with open(path, "rb") as file:
        reader = _Reader(file.read(), str(path))
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    tensors: dict[str, np.ndarray] = {}
    while reader.offset < len(reader.data):
        name = reader.take(reader.u32()).decode("utf-8")
        ndim = reader.u32()
        shape = tuple(reader.u32() for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape)
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor {name}")
        tensors[name] = values.astype(np.float32)
    log.debug("Loaded %d tensors from %s", len(tensors), path)
    return tensors


def save_correspondence(path: str | os.PathLike, correspondence: Correspondence) -> None:
    """Write the sparse row encoding of a correspondence."""
    records = np.zeros(correspondence.num_tokens, dtype=_CORRESPONDENCE_RECORD)
    records["source"] = np.where(correspondence.visible, correspondence.source_index, NO_SOURCE_U32)
    records["visible"] = correspondence.visible
    with atomic_write(path) as file:
        file.write(CORRESPONDENCE_MAGIC + struct.pack("<I", correspondence.num_tokens) + records.tobytes())


def load_correspondence(path: str | os.PathLike, height_tokens: int, width_tokens: int) -> Correspondence:
    """Read a correspondence of a known token grid, re-validating its invariants.

    Raises
    ------
    FormatError
        Wrong magic, token count or truncated content.
    ValueError
        Correspondence invariants violated.
    """
    with open(path, "rb") as file:
        reader = _Reader(file.read(), str(path))
    if reader.take(4) != CORRESPONDENCE_MAGIC:
        raise FormatError(f"{path}: not a correspondence file")
    count = reader.u32()
    if count != height_tokens * width_tokens:
        raise FormatError(f"{path}: {count} tokens, expected {height_tokens}x{width_tokens}")
    records = np.frombuffer(reader.take(count * _CORRESPONDENCE_RECORD.itemsize), dtype=_CORRESPONDENCE_RECORD)
    if reader.offset != len(reader.data):
        raise FormatError(f"{path}: trailing bytes")
    visible = records["visible"]
    if np.any(visible > 1):
        raise FormatError(f"{path}: visibility flags must be 0 or 1")
    source = records["source"].astype(np.int64)
    if np.any(source[visible == 0] != NO_SOURCE_U32):
        raise ValueError(f"{path}: invisible row references a source token")
    source[visible == 0] = NO_SOURCE
    return Correspondence(source, visible.astype(bool), height_tokens, width_tokens)
