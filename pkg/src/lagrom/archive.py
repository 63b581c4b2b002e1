"""On-disk archive for named float64 arrays.

Layout (all integers little-endian): a 4-byte magic, a u32 format version,
a u32 entry count, then per entry a u16 name length, the UTF-8 name, a u8
rank, u64 dimensions, and the row-major little-endian float64 payload.
Round-trips are bit-exact.
"""

import struct

import numpy as np

MAGIC = b"LGRM"
VERSION = 1


def save_archive(path, arrays: dict) -> None:
    """Write a name -> ndarray mapping; scalars are stored as rank-0."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(arrays)))
        for name, array in arrays.items():
            data = np.asarray(array, dtype="<f8", order="C")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack("<%dQ" % data.ndim, *data.shape))
            fh.write(data.tobytes(order="C"))


def load_archive(path) -> dict:
    """Read an archive back into a name -> ndarray mapping."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not a matrix archive: bad magic")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError("unsupported archive version %d" % version)
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack("<%dQ" % ndim, fh.read(8 * ndim)) if ndim else ()
            size = int(np.prod(shape)) if ndim else 1
            payload = fh.read(8 * size)
            if len(payload) != 8 * size:
                raise ValueError("truncated archive entry %r" % name)
            arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    return arrays
