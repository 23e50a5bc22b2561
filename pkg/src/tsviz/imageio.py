"""Binary PPM (P6) / PGM (P5) images, 8 bits per sample, plus the dataset directory layout.

Pixel value ``v`` in [0, 1] is stored as the byte ``round(v * 255)``.
"""
import csv
import os

import numpy as np

from .errors import FormatError
from .synth import DatasetSplit, SyntheticSample, class_name


def _to_bytes(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ValueError("pixel values must lie in [0, 1]")
    return np.rint(v * 255.0).astype(np.uint8)


def _write(path, magic, data):
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"{magic}\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data).tobytes())


def write_ppm(image, path):
    """Write an (h, w, 3) image."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"PPM needs an (h, w, 3) image, got {image.shape}")
    _write(path, "P6", _to_bytes(image))


def write_pgm(values, path):
    """Write an (h, w) map (e.g. a normalized heatmap or a boolean mask)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"PGM needs an (h, w) map, got {values.shape}")
    _write(path, "P5", _to_bytes(values))


def _tokens(buf, count):
    """Read ``count`` whitespace-separated header tokens, skipping # comments."""
    out, pos = [], 0
    while len(out) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise FormatError("truncated header")
        if buf[pos:pos + 1] == b"#":
            end = buf.find(b"\n", pos)
            pos = len(buf) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        out.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def _read(path, magic, channels):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != magic.encode("ascii"):
        raise FormatError(f"{path}: expected magic {magic}, got {buf[:2]!r}")
    toks, pos = _tokens(buf[2:], 3)
    try:
        w, h, maxval = (int(t) for t in toks)
    except ValueError:
        raise FormatError(f"{path}: malformed header {toks!r}") from None
    if w <= 0 or h <= 0 or maxval != 255:
        raise FormatError(f"{path}: unsupported header width={w} height={h} maxval={maxval}")
    body = buf[2 + pos:]
    n = w * h * channels
    if len(body) < n:
        raise FormatError(f"{path}: raster truncated ({len(body)} of {n} bytes)")
    data = np.frombuffer(body[:n], dtype=np.uint8).astype(np.float64) / 255.0
    return data.reshape((h, w, channels) if channels > 1 else (h, w))


def read_ppm(path):
    return _read(path, "P6", 3)


def read_pgm(path):
    return _read(path, "P5", 1)


# dataset directories: <root>/<class>/<id>.ppm, <id>.mask.pgm, manifest.csv

def save_dataset(split, root):
    """Write every sample plus ``manifest.csv`` (path, label, split)."""
    os.makedirs(root, exist_ok=True)
    rows = []
    for part, samples in (("train", split.train), ("validation", split.validation)):
        for s in samples:
            cls = class_name(s.label)
            os.makedirs(os.path.join(root, cls), exist_ok=True)
            rel = f"{cls}/{s.id}.ppm"
            write_ppm(s.image, os.path.join(root, rel))
            write_pgm(s.lesion_mask.astype(np.float64), os.path.join(root, cls, f"{s.id}.mask.pgm"))
            rows.append((rel, s.label, part))
    with open(os.path.join(root, "manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label", "split"])
        w.writerows(rows)
    return os.path.join(root, "manifest.csv")


def load_dataset(root):
    """Inverse of :func:`save_dataset`.

    The leaf mask is recovered as the set of non-black pixels.
    """
    manifest = os.path.join(root, "manifest.csv")
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"no manifest.csv under {root}")
    parts = {"train": [], "validation": []}
    labels = set()
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            img = read_ppm(os.path.join(root, row["path"]))
            mask_path = os.path.join(root, row["path"][:-len(".ppm")] + ".mask.pgm")
            lesion = read_pgm(mask_path) > 0.5 if os.path.exists(mask_path) else np.zeros(img.shape[:2], bool)
            label = int(row["label"])
            labels.add(label)
            sid = os.path.basename(row["path"])[:-len(".ppm")]
            parts[row["split"]].append(SyntheticSample(img, label, lesion, img.max(axis=2) > 0, sid))
    return DatasetSplit(parts["train"], parts["validation"], max(labels) + 1 if labels else 0)
