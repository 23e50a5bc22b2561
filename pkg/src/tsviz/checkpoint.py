"""Little-endian binary checkpoints.

Layout::

    b"TSVZ"  u32 version
    u32 config length, config as UTF-8 JSON
    u32 parameter count
    per parameter: u32 name length, name, u32 rank, rank * u32 extents, float64 data
"""
import json
import struct

import numpy as np

from .autodiff import Parameter
from .errors import CheckpointShapeError, CheckpointVersionError, FormatError
from .network import NetworkConfig, TeacherStudentModel, parameter_shapes

MAGIC = b"TSVZ"
VERSION = 1


def save_checkpoint(model, path):
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(cfg)) + cfg)
        fh.write(struct.pack("<I", len(model.params)))
        for name, p in model.params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)) + raw)
            fh.write(struct.pack(f"<I{p.value.ndim}I", p.value.ndim, *p.value.shape))
            fh.write(p.value.astype("<f8").tobytes())


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.path}: truncated checkpoint at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path, model=None):
    """Read a checkpoint.

    Without ``model`` a new :class:`TeacherStudentModel` is built from the
    stored config.  With ``model`` the stored tensors are copied into it after
    checking that every name and shape agrees.
    """
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: not a tsviz checkpoint (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: checkpoint version {version}, expected {VERSION}")
    try:
        cfg = NetworkConfig(**json.loads(r.take(r.u32()).decode("utf-8")))
    except (ValueError, TypeError) as e:
        raise FormatError(f"{path}: unreadable config block ({e})") from None
    tensors = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank))
        n = int(np.prod(shape)) if rank else 1
        tensors[name] = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(r.buf):
        raise FormatError(f"{path}: {len(r.buf) - r.pos} trailing bytes")

    if model is None:
        expected = {n: s for n, s in parameter_shapes(cfg).items()}
    else:
        expected = {n: p.value.shape for n, p in model.params.items()}
    diff = set(expected) ^ set(tensors)
    if diff:
        raise CheckpointShapeError(f"{path}: parameter sets differ: {sorted(diff)[:5]}")
    for name, value in tensors.items():
        if tuple(expected[name]) != value.shape:
            raise CheckpointShapeError(
                f"{path}: {name} has shape {value.shape}, model expects {tuple(expected[name])}")

    if model is None:
        model = TeacherStudentModel.__new__(TeacherStudentModel)
        model.config = cfg
        model.params = {name: Parameter(name, tensors[name]) for name in expected}
        return model
    for name, value in tensors.items():
        model.params[name].value[...] = value
        model.params[name].momentum[...] = 0.0
    model.config = cfg
    return model
