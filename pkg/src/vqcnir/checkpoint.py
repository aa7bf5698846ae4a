"""Single-file binary checkpoint format.

Layout (little-endian):

    magic "VQCN" | u32 version | u32 config_len | config utf-8
    u32 entry_count
    per entry: u16 name_len | name utf-8 | u8 ndim | u32 dims... | u64 offset
    payload: raw float64 blobs at the recorded offsets

Offsets are relative to the payload start, which follows the last manifest
entry immediately. Parsing errors report the absolute byte offset.
"""

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"VQCN"
VERSION = 1


def save(path, named_arrays, config_text=""):
    """Write (name, float64 array) pairs plus a config text block."""
    manifest = []
    payload = bytearray()
    for name, arr in named_arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        manifest.append((name, arr.shape, len(payload)))
        payload.extend(arr.tobytes())
    cfg = config_text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(cfg)))
        fh.write(cfg)
        fh.write(struct.pack("<I", len(manifest)))
        for name, shape, offset in manifest:
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", len(shape)))
            for d in shape:
                fh.write(struct.pack("<I", d))
            fh.write(struct.pack("<Q", offset))
        fh.write(bytes(payload))


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n, what):
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated while reading {what} at byte offset {self.pos}")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        (val,) = struct.unpack(fmt, self.take(struct.calcsize(fmt), what))
        return val


def load(path):
    """Read a checkpoint; returns (config_text, {name: float64 array})."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, str(path))
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0, expected {MAGIC!r}")
    version = r.unpack("<I", "version")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version} at byte offset 4")
    cfg_len = r.unpack("<I", "config length")
    config_text = r.take(cfg_len, "config text").decode("utf-8")
    count = r.unpack("<I", "entry count")
    manifest = []
    for _ in range(count):
        name_len = r.unpack("<H", "name length")
        name = r.take(name_len, "name").decode("utf-8")
        ndim = r.unpack("<B", "rank")
        shape = tuple(r.unpack("<I", "dimension") for _ in range(ndim))
        offset = r.unpack("<Q", "offset")
        manifest.append((name, shape, offset))
    payload_start = r.pos
    arrays = {}
    for name, shape, offset in manifest:
        n = int(np.prod(shape)) if shape else 1
        start = payload_start + offset
        end = start + 8 * n
        if end > len(blob):
            raise FormatError(f"{path}: payload for {name!r} runs past end of file at byte offset {start}")
        arrays[name] = np.frombuffer(blob[start:end], dtype="<f8").reshape(shape).copy()
    return config_text, arrays
